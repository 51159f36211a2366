/**
 * Episode-file parsing and intervention statistics for the charts page.
 *
 * Must agree with the command line's `stats` output exactly: a run is a
 * maximal block of consecutive human-corrected steps within one episode,
 * the mean run length is total intervention steps over run count (0 when
 * there are no runs).
 */

export interface ParsedEpisode {
  id: string;
  task: string;
  scenario: string;
  outcome: string;
  /** per-step action source tags, in order */
  sources: string[];
}

export interface InterventionStats {
  totalInterventionSteps: number;
  runCount: number;
  meanRunLength: number;
}

export interface EpisodeStatsRow extends InterventionStats {
  id: string;
  scenario: string;
  outcome: string;
  steps: number;
}

const HUMAN = "human_correction";

export function interventionStats(sourcesPerEpisode: string[][]): InterventionStats {
  let total = 0;
  let runs = 0;
  for (const sources of sourcesPerEpisode) {
    let inRun = false;
    for (const source of sources) {
      if (source === HUMAN) {
        total += 1;
        if (!inRun) {
          runs += 1;
          inRun = true;
        }
      } else {
        inRun = false;
      }
    }
  }
  return {
    totalInterventionSteps: total,
    runCount: runs,
    meanRunLength: runs > 0 ? total / runs : 0,
  };
}

/** Parse one `*.episode.jsonl` file: header line, step lines, footer line. */
export function parseEpisodeFile(text: string): ParsedEpisode {
  const lines = text.split("\n").filter((line) => line.length > 0);
  if (lines.length < 3) {
    throw new Error("episode file too short (need header, steps, footer)");
  }
  const header = JSON.parse(lines[0]!) as Record<string, unknown>;
  if (header.schema !== 1) {
    throw new Error(`unsupported episode schema ${String(header.schema)}`);
  }
  const footer = JSON.parse(lines[lines.length - 1]!) as Record<string, unknown>;
  if (typeof footer.outcome !== "string" || typeof footer.steps !== "number") {
    throw new Error("episode file missing its footer (truncated?)");
  }
  const stepLines = lines.slice(1, -1);
  if (stepLines.length !== footer.steps) {
    throw new Error(`footer says ${footer.steps} steps, file has ${stepLines.length}`);
  }
  const sources = stepLines.map((line, i) => {
    const step = JSON.parse(line) as Record<string, unknown>;
    if (typeof step.source !== "string") {
      throw new Error(`step ${i} has no source tag`);
    }
    return step.source;
  });
  return {
    id: String(header.id),
    task: String(header.task),
    scenario: String(header.scenario),
    outcome: String(footer.outcome),
    sources,
  };
}

/** Per-episode chart rows, ordered by episode id like the CLI output. */
export function episodeStatsRows(episodes: ParsedEpisode[]): EpisodeStatsRow[] {
  return [...episodes]
    .sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0))
    .map((ep) => {
      const stats = interventionStats([ep.sources]);
      return {
        id: ep.id,
        scenario: ep.scenario,
        outcome: ep.outcome,
        steps: ep.sources.length,
        ...stats,
      };
    });
}

/** Mirror of the CLI's per-episode line, for byte-exact comparison. */
export function formatStatsLine(row: EpisodeStatsRow): string {
  return (
    `episode ${row.id} scenario ${row.scenario} outcome ${row.outcome} ` +
    `steps ${row.steps} intervention_steps ${row.totalInterventionSteps} ` +
    `runs ${row.runCount} mean_run_length ${row.meanRunLength.toFixed(3)}`
  );
}

/** Mirror of the CLI's aggregate RESULT line. */
export function formatResultLine(episodes: ParsedEpisode[]): string {
  const total = interventionStats(episodes.map((ep) => ep.sources));
  return (
    `RESULT episodes=${episodes.length} ` +
    `intervention_steps=${total.totalInterventionSteps} ` +
    `runs=${total.runCount} mean_run_length=${total.meanRunLength.toFixed(3)}`
  );
}
