"""Episode recording, persistence, dataset mixing, intervention statistics.

Episodes persist as line-delimited JSON text: a header line, one step per
line, and a footer line written at finalize. Text keeps the files diffable
and append-safe — a crash leaves a readable prefix and a missing footer,
which the reader reports with a line number. Serialization is canonical
(sorted keys, fixed separators), so writing the same episode twice yields
byte-identical files.

One writer per episode file; readers only open finalized files.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FileFormatError, InputError
from .kinematics import JointVector
from .sync import ActionSource, ControlMode

SCHEMA_VERSION = 1
EPISODE_SUFFIX = ".episode.jsonl"

# Episodes end when the reward fires or this many steps have been taken.
DEFAULT_MAX_STEPS = 200


class Outcome(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    TRUNCATED = "truncated"


class Scenario(enum.Enum):
    ID = "id"
    OOD_STATIC = "ood-static"
    OOD_DYNAMIC = "ood-dynamic"


class MixSetting(enum.Enum):
    """The four correction-mixing recipes (see mix_datasets)."""

    EADC = "EADC"  # equal-amount substitution: corrections unfiltered
    FCID = "FCID"  # in-distribution failure correction
    ODSS = "ODSS"  # out-of-distribution, static placements
    ODDS = "ODDS"  # out-of-distribution, dynamic disturbance


@dataclass
class Observation:
    """Follower joint state plus task-specific scalars (e.g. goal coordinates)."""

    q: np.ndarray
    gripper: float
    extras: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.extras = np.asarray(self.extras, dtype=float)
        self.gripper = float(self.gripper)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, [self.gripper], self.extras])

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return (
            np.array_equal(self.q, other.q)
            and self.gripper == other.gripper
            and np.array_equal(self.extras, other.extras)
        )


@dataclass
class Step:
    t: int
    time: float
    observation: Observation
    action: JointVector
    source: ActionSource
    mode: ControlMode
    reward: int

    def __post_init__(self):
        if self.reward not in (0, 1):
            raise InputError(f"reward must be 0 or 1, got {self.reward}")
        if (self.source is ActionSource.HUMAN_CORRECTION) != (self.mode is ControlMode.INTERVENTION):
            raise InputError(
                "human-corrected steps and intervention mode must coincide "
                f"(source={self.source.value}, mode={self.mode.value})"
            )

    def __eq__(self, other):
        if not isinstance(other, Step):
            return NotImplemented
        return (
            self.t == other.t
            and self.time == other.time
            and self.observation == other.observation
            and self.action == other.action
            and self.source == other.source
            and self.mode == other.mode
            and self.reward == other.reward
        )


@dataclass
class EpisodeRecord:
    id: str
    task: str
    steps: list[Step]
    outcome: Outcome
    scenario: Scenario
    joints: int
    rate_hz: float
    max_steps: int = DEFAULT_MAX_STEPS

    def __eq__(self, other):
        if not isinstance(other, EpisodeRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.task == other.task
            and self.steps == other.steps
            and self.outcome == other.outcome
            and self.scenario == other.scenario
            and self.joints == other.joints
            and self.rate_hz == other.rate_hz
            and self.max_steps == other.max_steps
        )

    def __len__(self) -> int:
        return len(self.steps)


class EpisodeRecorder:
    """Builds one episode, enforcing step ordering; finalize exactly once."""

    def __init__(
        self,
        episode_id: str,
        task: str,
        scenario: Scenario,
        joints: int,
        rate_hz: float,
        max_steps: int = DEFAULT_MAX_STEPS,
    ):
        self.episode_id = episode_id
        self.task = task
        self.scenario = scenario
        self.joints = joints
        self.rate_hz = rate_hz
        self.max_steps = max_steps
        self._steps: list[Step] = []
        self._finalized = False

    @property
    def step_count(self) -> int:
        return len(self._steps)

    def append_step(self, step: Step) -> None:
        if self._finalized:
            raise InputError("episode already finalized")
        if step.t != len(self._steps):
            raise InputError(f"step t={step.t} out of order (expected {len(self._steps)})")
        if len(step.action) != self.joints:
            raise InputError(f"action has {len(step.action)} joints, episode expects {self.joints}")
        if len(self._steps) >= self.max_steps:
            raise InputError(f"episode exceeds the {self.max_steps}-step cap")
        self._steps.append(step)

    def finalize(self, outcome: Outcome) -> EpisodeRecord:
        if self._finalized:
            raise InputError("episode already finalized")
        if not self._steps:
            raise InputError("cannot finalize an empty episode")
        last = self._steps[-1]
        at_cap_without_reward = len(self._steps) == self.max_steps and last.reward == 0
        if outcome is Outcome.TRUNCATED and not at_cap_without_reward:
            raise InputError(
                "outcome truncated requires exactly the step cap with no final reward"
            )
        if outcome is not Outcome.TRUNCATED and at_cap_without_reward:
            raise InputError("episode hit the step cap without reward; outcome must be truncated")
        if outcome is Outcome.SUCCESS and last.reward != 1:
            raise InputError("success requires reward 1 on the final step")
        if outcome is not Outcome.SUCCESS and last.reward == 1:
            raise InputError("final reward 1 requires outcome success")
        self._finalized = True
        return EpisodeRecord(
            id=self.episode_id,
            task=self.task,
            steps=self._steps,
            outcome=outcome,
            scenario=self.scenario,
            joints=self.joints,
            rate_hz=self.rate_hz,
            max_steps=self.max_steps,
        )


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _step_to_obj(step: Step) -> dict:
    return {
        "t": step.t,
        "time": step.time,
        "obs": {
            "q": [float(x) for x in step.observation.q],
            "gripper": step.observation.gripper,
            "extras": [float(x) for x in step.observation.extras],
        },
        "action": {"q": [float(x) for x in step.action.q], "gripper": step.action.gripper},
        "source": step.source.value,
        "mode": step.mode.value,
        "reward": step.reward,
    }


def _step_from_obj(obj: dict) -> Step:
    return Step(
        t=obj["t"],
        time=obj["time"],
        observation=Observation(
            np.array(obj["obs"]["q"], dtype=float),
            obj["obs"]["gripper"],
            np.array(obj["obs"]["extras"], dtype=float),
        ),
        action=JointVector(np.array(obj["action"]["q"], dtype=float), obj["action"]["gripper"]),
        source=ActionSource(obj["source"]),
        mode=ControlMode(obj["mode"]),
        reward=obj["reward"],
    )


def write_episode(record: EpisodeRecord, path) -> None:
    path = Path(path)
    header = {
        "schema": SCHEMA_VERSION,
        "task": record.task,
        "joints": record.joints,
        "rate_hz": record.rate_hz,
        "id": record.id,
        "scenario": record.scenario.value,
        "max_steps": record.max_steps,
    }
    footer = {"outcome": record.outcome.value, "steps": len(record.steps)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for step in record.steps:
            fh.write(_dumps(_step_to_obj(step)) + "\n")
        fh.write(_dumps(footer) + "\n")


def read_episode(path) -> EpisodeRecord:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FileFormatError(path, 1, "empty episode file")

    def parse(lineno: int) -> dict:
        try:
            obj = json.loads(lines[lineno - 1])
        except json.JSONDecodeError as exc:
            raise FileFormatError(path, lineno, f"bad JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise FileFormatError(path, lineno, "expected a JSON object")
        return obj

    header = parse(1)
    if header.get("schema") != SCHEMA_VERSION:
        raise FileFormatError(path, 1, f"schema {header.get('schema')!r} unsupported (want {SCHEMA_VERSION})")
    footer_line = len(lines)
    footer = parse(footer_line)
    if "outcome" not in footer or "steps" not in footer:
        raise FileFormatError(
            path, footer_line, "missing footer line (file truncated before finalize?)"
        )
    step_lines = lines[1:-1]
    if footer["steps"] != len(step_lines):
        raise FileFormatError(
            path,
            footer_line,
            f"footer says {footer['steps']} steps but file has {len(step_lines)}",
        )
    steps = []
    for i, _ in enumerate(step_lines, start=2):
        obj = parse(i)
        try:
            step = _step_from_obj(obj)
        except (KeyError, ValueError, InputError) as exc:
            raise FileFormatError(path, i, f"bad step record: {exc}") from None
        if step.t != len(steps):
            raise FileFormatError(path, i, f"step t={step.t} out of order")
        steps.append(step)
    if not steps:
        raise FileFormatError(path, footer_line, "episode has no steps")
    try:
        return EpisodeRecord(
            id=header["id"],
            task=header["task"],
            steps=steps,
            outcome=Outcome(footer["outcome"]),
            scenario=Scenario(header["scenario"]),
            joints=header["joints"],
            rate_hz=header["rate_hz"],
            max_steps=header.get("max_steps", DEFAULT_MAX_STEPS),
        )
    except (KeyError, ValueError) as exc:
        raise FileFormatError(path, 1, f"bad header: {exc}") from None


def episode_filename(record: EpisodeRecord) -> str:
    return f"{record.id}{EPISODE_SUFFIX}"


def load_episode_dir(directory) -> list[EpisodeRecord]:
    directory = Path(directory)
    records = [read_episode(p) for p in sorted(directory.glob(f"*{EPISODE_SUFFIX}"))]
    if not records:
        raise InputError(f"no *{EPISODE_SUFFIX} files under {directory}")
    return records


# --- dataset mixing --------------------------------------------------------


@dataclass
class Dataset:
    setting: MixSetting
    episodes: list[EpisodeRecord]
    expert_count: int
    correction_count: int
    steps_by_source: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.episodes)


def has_correction_steps(episode: EpisodeRecord) -> bool:
    return any(s.source is ActionSource.HUMAN_CORRECTION for s in episode.steps)


def mix_datasets(expert, corrections, setting: MixSetting) -> Dataset:
    """Union the expert set with corrections filtered per the mix setting.

    EADC keeps every correction episode; FCID keeps in-distribution episodes
    that actually contain a human correction; ODSS/ODDS keep the matching
    out-of-distribution scenario. The expert set is always included whole.
    """
    expert = list(expert)
    corrections = list(corrections)
    if setting is MixSetting.EADC:
        kept = corrections
    elif setting is MixSetting.FCID:
        kept = [
            e for e in corrections if e.scenario is Scenario.ID and has_correction_steps(e)
        ]
    elif setting is MixSetting.ODSS:
        kept = [e for e in corrections if e.scenario is Scenario.OOD_STATIC]
    elif setting is MixSetting.ODDS:
        kept = [e for e in corrections if e.scenario is Scenario.OOD_DYNAMIC]
    else:  # pragma: no cover - enum is closed
        raise InputError(f"unknown mix setting {setting!r}")
    if not expert and not kept:
        raise InputError(f"mix {setting.value}: nothing to mix (no expert episodes either)")
    if corrections and not kept:
        raise InputError(
            f"mix {setting.value}: no correction episode passes the filter "
            f"({len(corrections)} candidates, scenarios "
            f"{sorted({e.scenario.value for e in corrections})})"
        )
    episodes = expert + kept
    counts: dict[str, int] = {src.value: 0 for src in ActionSource}
    for ep in episodes:
        for step in ep.steps:
            counts[step.source.value] += 1
    return Dataset(
        setting=setting,
        episodes=episodes,
        expert_count=len(expert),
        correction_count=len(kept),
        steps_by_source=counts,
    )


# --- intervention statistics ------------------------------------------------


@dataclass(frozen=True)
class InterventionStats:
    total_intervention_steps: int
    run_count: int
    mean_run_length: float


def intervention_stats(episodes) -> InterventionStats:
    """A run is a maximal block of consecutive human-corrected steps within
    one episode; runs never span episode boundaries."""
    total = 0
    runs = 0
    for ep in episodes:
        in_run = False
        for step in ep.steps:
            if step.source is ActionSource.HUMAN_CORRECTION:
                total += 1
                if not in_run:
                    runs += 1
                    in_run = True
            else:
                in_run = False
    mean = total / runs if runs else 0.0
    return InterventionStats(total, runs, mean)


# --- manifests ---------------------------------------------------------------


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, dataset: Dataset, member_paths) -> None:
    """Record the mixed dataset: setting, counts, and member files with checksums.

    Member paths are stored relative to the manifest's directory when
    possible, absolute otherwise.
    """
    path = Path(path)
    member_paths = [Path(p) for p in member_paths]
    if len(member_paths) != len(dataset.episodes):
        raise InputError("one member path per episode required")
    base = path.resolve().parent
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"setting {dataset.setting.value} expert {dataset.expert_count} "
            f"corrections {dataset.correction_count}\n"
        )
        for p in member_paths:
            resolved = p.resolve()
            try:
                shown = resolved.relative_to(base)
            except ValueError:
                shown = resolved
            fh.write(f"{file_sha256(p)}  {shown}\n")


def read_manifest(path) -> tuple[MixSetting, int, int, list[tuple[str, str]]]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FileFormatError(path, 1, "empty manifest")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "setting" or head[2] != "expert" or head[4] != "corrections":
        raise FileFormatError(path, 1, "expected `setting X expert N corrections M`")
    try:
        setting = MixSetting(head[1])
        expert, corrections = int(head[3]), int(head[5])
    except ValueError as exc:
        raise FileFormatError(path, 1, str(exc)) from None
    members = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or len(parts[0]) != 64:
            raise FileFormatError(path, lineno, f"expected `<sha256> <file>`, got {line!r}")
        members.append((parts[0], parts[1]))
    return setting, expert, corrections, members
