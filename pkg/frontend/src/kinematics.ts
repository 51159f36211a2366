/**
 * Planar projection for the 2D arm sketch: a schematic chain of equal-length
 * links driven by cumulative joint angles. Enough to judge whether leader
 * and follower agree and to steer an intervention; not a 3D render.
 */

export type Point = [number, number];

export function planarChainPoints(q: number[], linkLength = 1): Point[] {
  const points: Point[] = [[0, 0]];
  let angle = 0;
  let x = 0;
  let y = 0;
  for (const joint of q) {
    angle += joint;
    x += linkLength * Math.cos(angle);
    y += linkLength * Math.sin(angle);
    points.push([x, y]);
  }
  return points;
}

/** Map workspace coordinates into an SVG viewport (y grows downward). */
export function toViewport(
  point: Point,
  reach: number,
  size: number
): Point {
  const scale = size / (2.2 * reach);
  return [size / 2 + point[0] * scale, size / 2 - point[1] * scale];
}

export function chainPolyline(q: number[], size: number): string {
  const links = Math.max(q.length, 1);
  const linkLength = 1 / links;
  const points = planarChainPoints(q, linkLength);
  return points
    .map((p) => toViewport(p, 1, size))
    .map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`)
    .join(" ");
}
