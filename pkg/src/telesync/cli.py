"""Operator-facing command line: simulate, calibrate, record, replay, mix,
train, evaluate, stats.

Every flag can also be set through an environment variable named
TELESYNC_<FLAG> (dashes become underscores, e.g. TELESYNC_RATE_HZ). Each
command finishes with a machine-parsable line `RESULT key=value ...` so CI
can scrape outcomes; errors print one line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .episodes import (
    EPISODE_SUFFIX,
    MixSetting,
    Outcome,
    Scenario,
    episode_filename,
    intervention_stats,
    load_episode_dir,
    read_episode,
    read_manifest,
    write_episode,
    write_manifest,
)
from .errors import TelesyncError
from .harness import (
    FrozenPolicy,
    HitlConfig,
    LookupBCPolicy,
    ScriptedExpert,
    ScriptedIntervenor,
    evaluate,
    hitl_q_learning,
    make_task,
    run_episode,
    train_lookup_bc,
)
from .harness.experiments import bc_weights, collect_corrections, collect_expert
from .kinematics import JointVector
from .servobus import DEFAULT_RESOLUTION, RawTicks
from .sync import calibrate as calibrate_profile
from .sync import save_profile

ENV_PREFIX = "TELESYNC_"


def _env_default(parser: argparse.ArgumentParser) -> None:
    """Let TELESYNC_<FLAG> environment variables override flag defaults."""
    for action in parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        env_name = ENV_PREFIX + action.dest.upper()
        raw = os.environ.get(env_name)
        if raw is None:
            continue
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            action.default = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            action.default = action.type(raw)
        else:
            action.default = raw
        action.required = False


def _result(**kv) -> None:
    print("RESULT " + " ".join(f"{k}={v}" for k, v in kv.items()))


def _parse_listen(spec: str) -> tuple[str, int]:
    host, _, port = spec.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _scenario(name: str) -> Scenario:
    return Scenario(name)


# --- subcommand implementations ---------------------------------------------


def cmd_sim(args) -> int:
    from .gateway import GatewayServer, RealtimeRunner
    from .harness.runner import build_loop

    task = make_task(args.task)
    loop = build_loop(task)
    policy = ScriptedExpert(task) if args.policy == "scripted" else None
    runner = RealtimeRunner(
        loop, args.rate_hz, task=task, episodes_dir=args.episodes_dir, policy=policy
    )
    host, port = _parse_listen(args.listen)

    async def main():
        gateway = GatewayServer(runner, host, port)
        await gateway.start()
        print(
            f"serving task {task.name} at {args.rate_hz:g} Hz on "
            f"{host}:{gateway.bound_port}",
            flush=True,
        )
        try:
            await runner.run(duration=args.duration)
        finally:
            await gateway.stop()
        return gateway

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    _result(ticks=len(runner.tick_wall_times), task=task.name)
    return 0


def cmd_calibrate(args) -> int:
    from .devices import SimLeader
    from .kinematics import JointLimits
    from .sync import CalibrationProfile

    reference_q = np.array([float(x) for x in args.reference.split(",")]) if args.reference else np.zeros(args.joints)
    if len(reference_q) != args.joints:
        raise TelesyncError(f"reference has {len(reference_q)} joints, expected {args.joints}")
    channels = args.joints + (1 if args.gripper else 0)
    signs = np.array([int(s) for s in args.signs.split(",")]) if args.signs else np.ones(channels, dtype=int)
    if args.interactive and sys.stdin.isatty():  # pragma: no cover - manual path
        input("pose the leader to mirror the follower reference pose, then press Enter...")
    # Simulated capture: the leader is posed exactly at the reference.
    reference = JointVector(reference_q, args.gripper_value)
    angles = np.append(reference_q, args.gripper_value * args.gripper_span) if args.gripper else reference_q
    neutral = CalibrationProfile(
        np.full(channels, DEFAULT_RESOLUTION // 2), np.ones(channels, dtype=int), args.resolution
    )
    leader = SimLeader(neutral, JointLimits.symmetric(channels, bound=np.pi), dt=0.02, angles0=angles)
    raw = leader.read_ticks()
    profile = calibrate_profile(raw, reference, signs, args.resolution, args.gripper_span)
    save_profile(args.out, profile)
    _result(profile=args.out, joints=args.joints, channels=channels, resolution=args.resolution)
    return 0


def cmd_record(args) -> int:
    task = make_task(args.task)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = _scenario(args.scenario)
    if args.intervene:
        base = _load_policy(args.policy, task) if args.policy else FrozenPolicy()
        episodes = collect_corrections(
            task, base, args.episodes, args.seed, scenario,
            min_progress=args.min_progress, label="corr",
        )
    else:
        episodes = collect_expert(task, args.episodes, args.seed, scenario=scenario)
    successes = 0
    for ep in episodes:
        write_episode(ep, out / episode_filename(ep))
        successes += ep.outcome is Outcome.SUCCESS
    _result(episodes=len(episodes), successes=successes, dir=out)
    return 0


def cmd_replay(args) -> int:
    from .devices import SimFollower
    from .harness.runner import build_loop

    episode = read_episode(args.file)
    task = make_task(episode.task)
    loop = build_loop(task)
    worst = 0.0
    for step in episode.steps:
        simulated = loop.follower.read_positions()
        worst = max(worst, float(np.max(np.abs(simulated.q - step.observation.q))))
        loop.follower.write_targets(step.action)
        loop.follower.step()
    _result(file=args.file, steps=len(episode.steps), outcome=episode.outcome.value,
            max_drift=f"{worst:.6f}")
    return 0


def cmd_mix(args) -> int:
    from .episodes import mix_datasets

    expert = load_episode_dir(args.expert)
    corrections = load_episode_dir(args.corrections)
    dataset = mix_datasets(expert, corrections, MixSetting(args.setting))
    expert_dir, corr_dir = Path(args.expert), Path(args.corrections)
    paths = []
    for ep in dataset.episodes:
        directory = expert_dir if ep in dataset.episodes[: dataset.expert_count] else corr_dir
        paths.append(directory / episode_filename(ep))
    write_manifest(args.out, dataset, paths)
    _result(
        setting=dataset.setting.value,
        episodes=len(dataset),
        expert=dataset.expert_count,
        corrections=dataset.correction_count,
        manifest=args.out,
    )
    return 0


def _load_dataset(path):
    """Accept an episode directory or a mix manifest."""
    p = Path(path)
    if p.is_dir():
        return load_episode_dir(p)
    setting, _, _, members = read_manifest(p)
    base = p.resolve().parent
    return [read_episode(base / name) for _, name in members]


def _save_policy(policy: LookupBCPolicy, task_name: str, path) -> None:
    np.savez(
        path,
        observations=policy.observations,
        actions_q=np.array([a.q for a in policy.actions]),
        actions_gripper=np.array([a.gripper for a in policy.actions]),
        weights=policy.weights,
        task=np.array(task_name),
    )


def _load_policy(path, task) -> LookupBCPolicy:
    data = np.load(path, allow_pickle=False)
    actions = [
        JointVector(q, float(g)) for q, g in zip(data["actions_q"], data["actions_gripper"])
    ]
    return LookupBCPolicy(data["observations"], actions, data["weights"])


def cmd_train_bc(args) -> int:
    task = make_task(args.task)
    episodes = _load_dataset(args.data)
    policy = train_lookup_bc(episodes, weights=bc_weights(task))
    _save_policy(policy, task.name, args.out)
    _result(policy=args.out, stored_steps=len(policy), episodes=len(episodes))
    return 0


def cmd_eval(args) -> int:
    task = make_task(args.task)
    policy = _load_policy(args.policy, task)
    rate, mean_len, _ = evaluate(policy, task, args.rollouts, args.seed, _scenario(args.scenario))
    _result(success_rate=f"{rate:.3f}", mean_length=f"{mean_len:.2f}", rollouts=args.rollouts)
    return 0


def _hitl_config(args) -> HitlConfig:
    """Build the learner config, with plain-text key/value file overrides."""
    fields = dict(online_episodes=args.online)
    if args.config:
        from .configio import read_kv_file

        kv = read_kv_file(args.config)
        valid = {f.name for f in HitlConfig.__dataclass_fields__.values()}
        for key, tokens in kv.items():
            if key not in valid:
                raise TelesyncError(f"{args.config}: unknown config key {key!r}")
            value = tokens[0]
            fields[key] = float(value) if "." in value or "e" in value.lower() else int(value)
    return HitlConfig(**fields)


def cmd_hitl_rl(args) -> int:
    task = make_task(args.task)
    config = _hitl_config(args)
    demos = collect_expert(task, args.demos, args.seed, label="demo")
    bc = train_lookup_bc(demos, weights=bc_weights(task))
    bc_rate, bc_len, _ = evaluate(bc, task, args.rollouts, args.seed + 1)
    result = hitl_q_learning(task, demos, config, args.seed + 2)
    final_rate, final_len, _ = evaluate(result.policy, task, args.rollouts, args.seed + 1)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_path = out_dir / "learning_curve.records"
    with open(curve_path, "w", encoding="utf-8") as fh:
        for point in result.curve:
            fh.write(
                f"episode {point.episode} seed {args.seed} outcome {point.outcome} "
                f"length {point.length} intervention_steps {point.intervention_steps} "
                f"intervention_runs {point.intervention_runs} "
                f"mean_intervention_length {point.mean_intervention_length:.3f}\n"
            )
    _result(
        bc_success=f"{bc_rate:.3f}",
        final_success=f"{final_rate:.3f}",
        bc_mean_length=f"{bc_len:.2f}",
        final_mean_length=f"{final_len:.2f}",
        curve=curve_path,
    )
    return 0


def _print_records_file(path: Path) -> int:
    """Re-print a line-delimited results file (e.g. a learning curve) and
    aggregate its intervention columns."""
    total_steps = total_runs = count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            print(line)
            fields = dict(zip(line.split()[::2], line.split()[1::2]))
            total_steps += int(fields.get("intervention_steps", 0))
            total_runs += int(fields.get("intervention_runs", 0))
            count += 1
    mean = total_steps / total_runs if total_runs else 0.0
    _result(
        episodes=count,
        intervention_steps=total_steps,
        runs=total_runs,
        mean_run_length=f"{mean:.3f}",
    )
    return 0


def cmd_stats(args) -> int:
    episodes = []
    for target in args.episodes:
        p = Path(target)
        if p.is_dir():
            episodes.extend(load_episode_dir(p))
        elif p.suffix == ".records":
            return _print_records_file(p)
        else:
            episodes.append(read_episode(p))
    episodes.sort(key=lambda e: e.id)
    for ep in episodes:
        stats = intervention_stats([ep])
        print(
            f"episode {ep.id} scenario {ep.scenario.value} outcome {ep.outcome.value} "
            f"steps {len(ep)} intervention_steps {stats.total_intervention_steps} "
            f"runs {stats.run_count} mean_run_length {stats.mean_run_length:.3f}"
        )
    total = intervention_stats(episodes)
    _result(
        episodes=len(episodes),
        intervention_steps=total.total_intervention_steps,
        runs=total.run_count,
        mean_run_length=f"{total.mean_run_length:.3f}",
    )
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telesync",
        description="bilateral leader/follower teleoperation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"telesync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="run the control loop and network gateway")
    p.add_argument("--task", default="reach2")
    p.add_argument("--rate-hz", type=float, default=10.0)
    p.add_argument("--listen", default="127.0.0.1:7447", help="host:port")
    p.add_argument("--policy", choices=["none", "scripted"], default="none")
    p.add_argument("--episodes-dir", default=None)
    p.add_argument("--duration", type=float, default=None, help="stop after SECONDS")
    p.add_argument("--role-token", default=None, help="reserved; roles are declared on connect")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("calibrate", help="capture a reference pose into a profile file")
    p.add_argument("--out", required=True)
    p.add_argument("--joints", type=int, default=6)
    p.add_argument("--gripper", action="store_true", default=True)
    p.add_argument("--no-gripper", dest="gripper", action="store_false")
    p.add_argument("--reference", default=None, help="comma-separated joint radians")
    p.add_argument("--signs", default=None, help="comma-separated +1/-1 per channel")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--gripper-span", type=float, default=float(np.pi / 2))
    p.add_argument("--gripper-value", type=float, default=0.0)
    p.add_argument("--interactive", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("record", help="record scripted demonstration or correction episodes")
    p.add_argument("--task", default="reach2")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", choices=[s.value for s in Scenario], default="id")
    p.add_argument("--intervene", action="store_true", help="run the scripted intervenor")
    p.add_argument("--policy", default=None, help="base policy file for correction runs")
    p.add_argument("--min-progress", type=float, default=0.0,
                   help="progress fraction required before intervention may engage")
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("replay", help="re-drive a simulated follower from an episode file")
    p.add_argument("file")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("mix", help="mix expert and correction episode sets")
    p.add_argument("--expert", required=True, help="directory of expert episodes")
    p.add_argument("--corrections", required=True, help="directory of correction episodes")
    p.add_argument("--setting", choices=[s.value for s in MixSetting], required=True)
    p.add_argument("--out", required=True, help="manifest path")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("train-bc", help="train the nearest-neighbor clone")
    p.add_argument("--data", required=True, help="episode directory or mix manifest")
    p.add_argument("--task", default="reach2")
    p.add_argument("--out", required=True, help="policy file (.npz)")
    p.set_defaults(func=cmd_train_bc)

    p = sub.add_parser("eval", help="seeded evaluation rollouts without intervention")
    p.add_argument("--policy", required=True)
    p.add_argument("--task", default="reach2")
    p.add_argument("--rollouts", "-n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", choices=[s.value for s in Scenario], default="id")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("hitl-rl", help="three-stage online fine-tuning run")
    p.add_argument("--task", default="dial")
    p.add_argument("--demos", type=int, default=20)
    p.add_argument("--online", type=int, default=50)
    p.add_argument("--rollouts", type=int, default=20)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", default=None,
                   help="plain-text key/value file overriding learner settings")
    p.set_defaults(func=cmd_hitl_rl)

    p = sub.add_parser("stats", help="intervention statistics per episode")
    p.add_argument("episodes", nargs="+", help="episode files or directories")
    p.set_defaults(func=cmd_stats)

    for action in sub.choices.values():
        _env_default(action)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TelesyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc.filename or exc} not found", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
