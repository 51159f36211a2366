"""Recording walkthrough: correction episodes, persistence, mixing, statistics.

Run:  python3 demos/04_record_and_stats.py
"""

import tempfile
from pathlib import Path

import numpy as np

from telesync.episodes import (
    MixSetting,
    Scenario,
    episode_filename,
    intervention_stats,
    mix_datasets,
    read_episode,
    write_episode,
)
from telesync.harness import (
    FrozenPolicy,
    ScriptedExpert,
    ScriptedIntervenor,
    planar_reach_task,
    run_episode,
)

task = planar_reach_task()
rng = np.random.default_rng(0)

# Ten scripted demonstrations (expert-tagged steps).
expert = [
    run_episode(task, ScriptedExpert(task), rng, episode_id=f"demo-{i:02d}")
    for i in range(10)
]
print("expert outcomes:", [e.outcome.value for e in expert])

# Ten runs of a uselessly frozen policy on out-of-distribution placements,
# rescued by the scripted intervenor: the rescue segments are tagged as
# human corrections.
corrections = [
    run_episode(
        task,
        FrozenPolicy(),
        rng,
        scenario=Scenario.OOD_STATIC,
        intervenor=ScriptedIntervenor(task),
        episode_id=f"corr-{i:02d}",
    )
    for i in range(10)
]
print("correction outcomes:", [e.outcome.value for e in corrections])

stats = intervention_stats(corrections)
print(
    f"interventions: {stats.total_intervention_steps} steps in {stats.run_count} runs, "
    f"mean run length {stats.mean_run_length:.1f}"
)

# Episode files are line-delimited text: header, one step per line, footer.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / episode_filename(corrections[0])
    write_episode(corrections[0], path)
    lines = path.read_text().splitlines()
    print(f"\n{path.name}: {len(lines)} lines")
    print("header:", lines[0][:96], "...")
    print("footer:", lines[-1])
    assert read_episode(path) == corrections[0]

# Mixing: the out-of-distribution-static recipe keeps matching corrections
# and always unions in the expert set.
dataset = mix_datasets(expert, corrections, MixSetting.ODSS)
print(
    f"\nmixed dataset: {len(dataset)} episodes "
    f"({dataset.expert_count} expert + {dataset.correction_count} corrections)"
)
print("steps by source:", dataset.steps_by_source)
