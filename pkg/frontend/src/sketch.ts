/** SVG markup for the two-arm sketch: leader and follower chains overlaid. */

import { chainPolyline } from "./kinematics.js";

export function armSketchSvg(
  leaderQ: number[],
  followerQ: number[],
  size: number
): string {
  const leader = chainPolyline(leaderQ, size);
  const follower = chainPolyline(followerQ, size);
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${size} ${size}" role="img">` +
    `<circle cx="${size / 2}" cy="${size / 2}" r="3" fill="#444"/>` +
    `<polyline points="${follower}" fill="none" stroke="#1a6fc2" stroke-width="5" ` +
    `stroke-linecap="round" opacity="0.85"/>` +
    `<polyline points="${leader}" fill="none" stroke="#c2571a" stroke-width="2.5" ` +
    `stroke-linecap="round" stroke-dasharray="6 3"/>` +
    `</svg>`
  );
}
