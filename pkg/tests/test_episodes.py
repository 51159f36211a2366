"""Episode store tests: recording rules, persistence, mixing, statistics."""

import itertools

import numpy as np
import pytest

from telesync.episodes import (
    DEFAULT_MAX_STEPS,
    Dataset,
    EpisodeRecord,
    EpisodeRecorder,
    InterventionStats,
    MixSetting,
    Observation,
    Outcome,
    Scenario,
    Step,
    episode_filename,
    file_sha256,
    intervention_stats,
    mix_datasets,
    read_episode,
    read_manifest,
    write_episode,
    write_manifest,
)
from telesync.errors import FileFormatError, InputError
from telesync.kinematics import JointVector
from telesync.sync import ActionSource, ControlMode


def make_step(t, source=ActionSource.POLICY, reward=0, q=None):
    mode = (
        ControlMode.INTERVENTION
        if source is ActionSource.HUMAN_CORRECTION
        else ControlMode.AUTONOMOUS
    )
    q = np.array([0.1 * t, -0.1 * t]) if q is None else np.asarray(q, dtype=float)
    return Step(
        t=t,
        time=t * 0.1,
        observation=Observation(q, 0.0, np.array([0.5, 0.25])),
        action=JointVector(q + 0.01),
        source=source,
        mode=mode,
        reward=reward,
    )


def make_episode(
    episode_id="ep0",
    sources=None,
    outcome=Outcome.SUCCESS,
    scenario=Scenario.ID,
    max_steps=DEFAULT_MAX_STEPS,
):
    sources = sources or [ActionSource.POLICY] * 4 + [ActionSource.POLICY]
    rec = EpisodeRecorder(episode_id, "reach", scenario, 2, 10.0, max_steps)
    for t, src in enumerate(sources):
        reward = 1 if (outcome is Outcome.SUCCESS and t == len(sources) - 1) else 0
        rec.append_step(make_step(t, src, reward))
    return rec.finalize(outcome)


class TestRecorder:
    def test_empty_finalize_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0)
        with pytest.raises(InputError, match="empty"):
            rec.finalize(Outcome.FAILURE)

    def test_out_of_order_step_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0)
        rec.append_step(make_step(0))
        with pytest.raises(InputError, match="out of order"):
            rec.append_step(make_step(2))

    def test_double_finalize_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0)
        rec.append_step(make_step(0))
        rec.finalize(Outcome.FAILURE)
        with pytest.raises(InputError, match="finalized"):
            rec.finalize(Outcome.FAILURE)

    def test_cap_without_reward_must_be_truncated(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0, max_steps=200)
        for t in range(200):
            rec.append_step(make_step(t))
        with pytest.raises(InputError, match="truncated"):
            rec.finalize(Outcome.FAILURE)

    def test_truncated_at_exactly_the_cap(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0, max_steps=200)
        for t in range(200):
            rec.append_step(make_step(t))
        ep = rec.finalize(Outcome.TRUNCATED)
        assert len(ep) == 200 and ep.outcome is Outcome.TRUNCATED

    def test_truncated_before_cap_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0, max_steps=200)
        rec.append_step(make_step(0))
        with pytest.raises(InputError):
            rec.finalize(Outcome.TRUNCATED)

    def test_reward_at_step_k_gives_success_length_k_plus_1(self):
        k = 7
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0)
        for t in range(k):
            rec.append_step(make_step(t))
        rec.append_step(make_step(k, reward=1))
        ep = rec.finalize(Outcome.SUCCESS)
        assert len(ep) == k + 1

    def test_success_without_reward_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0)
        rec.append_step(make_step(0))
        with pytest.raises(InputError, match="reward 1"):
            rec.finalize(Outcome.SUCCESS)

    def test_correction_source_requires_intervention_mode(self):
        with pytest.raises(InputError, match="coincide"):
            Step(
                t=0,
                time=0.0,
                observation=Observation(np.zeros(2), 0.0, np.zeros(2)),
                action=JointVector(np.zeros(2)),
                source=ActionSource.HUMAN_CORRECTION,
                mode=ControlMode.AUTONOMOUS,
                reward=0,
            )

    def test_steps_beyond_cap_rejected(self):
        rec = EpisodeRecorder("e", "reach", Scenario.ID, 2, 10.0, max_steps=3)
        for t in range(3):
            rec.append_step(make_step(t))
        with pytest.raises(InputError, match="cap"):
            rec.append_step(make_step(3))


class TestPersistence:
    def test_round_trip_is_exact(self, tmp_path):
        ep = make_episode(sources=[ActionSource.POLICY, ActionSource.HUMAN_CORRECTION,
                                   ActionSource.HUMAN_CORRECTION, ActionSource.POLICY,
                                   ActionSource.EXPERT])
        path = tmp_path / episode_filename(ep)
        write_episode(ep, path)
        assert read_episode(path) == ep

    def test_random_round_trips(self, tmp_path):
        rng = np.random.default_rng(3)
        for i in range(25):
            n = int(rng.integers(1, 30))
            sources = [
                ActionSource(rng.choice([s.value for s in ActionSource])) for s in range(n)
            ]
            outcome = Outcome.SUCCESS if rng.random() < 0.5 else Outcome.FAILURE
            rec = EpisodeRecorder(f"ep{i}", "reach", Scenario.OOD_STATIC, 2, 10.0)
            for t, src in enumerate(sources):
                reward = 1 if (outcome is Outcome.SUCCESS and t == n - 1) else 0
                rec.append_step(
                    make_step(t, src, reward, q=rng.uniform(-3, 3, size=2))
                )
            ep = rec.finalize(outcome)
            path = tmp_path / f"{i}.episode.jsonl"
            write_episode(ep, path)
            assert read_episode(path) == ep

    def test_write_is_byte_stable(self, tmp_path):
        ep = make_episode()
        a, b = tmp_path / "a.episode.jsonl", tmp_path / "b.episode.jsonl"
        write_episode(ep, a)
        write_episode(ep, b)
        assert a.read_bytes() == b.read_bytes()

    def test_header_carries_rate(self, tmp_path):
        ep = make_episode()
        path = tmp_path / "x.episode.jsonl"
        write_episode(ep, path)
        import json

        header = json.loads(path.read_text().splitlines()[0])
        assert header["rate_hz"] == 10.0 and header["schema"] == 1

    def test_missing_final_line_names_the_line(self, tmp_path):
        ep = make_episode()
        path = tmp_path / "x.episode.jsonl"
        write_episode(ep, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(FileFormatError, match=rf"x\.episode\.jsonl:{len(lines) - 1}"):
            read_episode(path)

    def test_schema_mismatch_rejected(self, tmp_path):
        ep = make_episode()
        path = tmp_path / "x.episode.jsonl"
        write_episode(ep, path)
        lines = path.read_text().splitlines()
        lines[0] = lines[0].replace('"schema":1', '"schema":9')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FileFormatError, match="schema"):
            read_episode(path)

    def test_corrupt_step_line_cited(self, tmp_path):
        ep = make_episode()
        path = tmp_path / "x.episode.jsonl"
        write_episode(ep, path)
        lines = path.read_text().splitlines()
        lines[2] = "{not json"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FileFormatError, match=r"x\.episode\.jsonl:3"):
            read_episode(path)


def quick_ep(i, scenario, sources, outcome=Outcome.FAILURE):
    rec = EpisodeRecorder(f"ep{i:03d}", "reach", scenario, 2, 10.0)
    for t, src in enumerate(sources):
        reward = 1 if (outcome is Outcome.SUCCESS and t == len(sources) - 1) else 0
        rec.append_step(make_step(t, src, reward))
    return rec.finalize(outcome)


class TestMixing:
    def test_eadc_keeps_everything(self):
        expert = [quick_ep(i, Scenario.ID, [ActionSource.EXPERT] * 3, Outcome.SUCCESS) for i in range(50)]
        corrections = [
            quick_ep(50 + i, Scenario.ID, [ActionSource.POLICY, ActionSource.HUMAN_CORRECTION], Outcome.FAILURE)
            for i in range(50)
        ]
        ds = mix_datasets(expert, corrections, MixSetting.EADC)
        assert len(ds) == 100
        assert ds.expert_count == 50 and ds.correction_count == 50

    def test_fcid_requires_id_scenario_and_corrections(self):
        expert = [quick_ep(0, Scenario.ID, [ActionSource.EXPERT], Outcome.SUCCESS)]
        ood_only = [
            quick_ep(1, Scenario.OOD_STATIC, [ActionSource.POLICY, ActionSource.HUMAN_CORRECTION])
        ]
        with pytest.raises(InputError, match="no correction episode passes"):
            mix_datasets(expert, ood_only, MixSetting.FCID)
        id_no_corr = [quick_ep(2, Scenario.ID, [ActionSource.POLICY])]
        with pytest.raises(InputError):
            mix_datasets(expert, id_no_corr, MixSetting.FCID)
        id_corr = [quick_ep(3, Scenario.ID, [ActionSource.POLICY, ActionSource.HUMAN_CORRECTION])]
        ds = mix_datasets(expert, id_corr, MixSetting.FCID)
        assert ds.correction_count == 1

    def test_odds_keeps_only_dynamic(self):
        expert = [quick_ep(0, Scenario.ID, [ActionSource.EXPERT], Outcome.SUCCESS)]
        mixed_bag = [
            quick_ep(1, Scenario.OOD_STATIC, [ActionSource.HUMAN_CORRECTION]),
            quick_ep(2, Scenario.OOD_DYNAMIC, [ActionSource.HUMAN_CORRECTION]),
            quick_ep(3, Scenario.ID, [ActionSource.POLICY]),
        ]
        ds = mix_datasets(expert, mixed_bag, MixSetting.ODDS)
        assert ds.correction_count == 1
        assert ds.episodes[-1].scenario is Scenario.OOD_DYNAMIC

    def test_size_and_provenance_counts(self):
        expert = [quick_ep(i, Scenario.ID, [ActionSource.EXPERT] * 2, Outcome.SUCCESS) for i in range(3)]
        corrections = [
            quick_ep(10 + i, Scenario.OOD_STATIC, [ActionSource.POLICY, ActionSource.HUMAN_CORRECTION])
            for i in range(4)
        ]
        ds = mix_datasets(expert, corrections, MixSetting.ODSS)
        assert len(ds) == len(expert) + 4
        total_steps = sum(len(e.steps) for e in ds.episodes)
        assert sum(ds.steps_by_source.values()) == total_steps
        assert ds.steps_by_source[ActionSource.EXPERT.value] == 6
        assert ds.steps_by_source[ActionSource.HUMAN_CORRECTION.value] == 4


class TestInterventionStats:
    def test_all_policy_episode(self):
        ep = quick_ep(0, Scenario.ID, [ActionSource.POLICY] * 5)
        assert intervention_stats([ep]) == InterventionStats(0, 0, 0.0)

    def test_worked_example(self):
        # P P H H H P H P -> 4 intervention steps in 2 runs, mean 2.0
        P, H = ActionSource.POLICY, ActionSource.HUMAN_CORRECTION
        ep = quick_ep(0, Scenario.ID, [P, P, H, H, H, P, H, P])
        stats = intervention_stats([ep])
        assert stats == InterventionStats(4, 2, 2.0)

    def test_single_all_human_episode(self):
        ep = quick_ep(0, Scenario.ID, [ActionSource.HUMAN_CORRECTION] * 7)
        assert intervention_stats([ep]) == InterventionStats(7, 1, 7.0)

    def test_runs_do_not_span_episodes(self):
        H = ActionSource.HUMAN_CORRECTION
        eps = [quick_ep(0, Scenario.ID, [H, H]), quick_ep(1, Scenario.ID, [H])]
        assert intervention_stats(eps) == InterventionStats(3, 2, 1.5)

    def test_matches_groupby_oracle_on_random_sequences(self):
        rng = np.random.default_rng(17)
        P, H, E = ActionSource.POLICY, ActionSource.HUMAN_CORRECTION, ActionSource.EXPERT
        for _ in range(2000):
            tags = [rng.choice([P, H, E]) for _ in range(int(rng.integers(1, 40)))]
            ep = quick_ep(0, Scenario.ID, tags)
            got = intervention_stats([ep])
            # Independent oracle: run-length encode with itertools.groupby.
            runs = [len(list(g)) for key, g in itertools.groupby(tags) if key is H]
            want_total, want_runs = sum(runs), len(runs)
            assert got.total_intervention_steps == want_total
            assert got.run_count == want_runs
            assert got.mean_run_length == (want_total / want_runs if want_runs else 0.0)


class TestManifest:
    def test_round_trip_with_checksums(self, tmp_path):
        expert = [quick_ep(i, Scenario.ID, [ActionSource.EXPERT], Outcome.SUCCESS) for i in range(2)]
        corrections = [quick_ep(5, Scenario.OOD_STATIC, [ActionSource.HUMAN_CORRECTION])]
        ds = mix_datasets(expert, corrections, MixSetting.ODSS)
        paths = []
        for ep in ds.episodes:
            p = tmp_path / episode_filename(ep)
            write_episode(ep, p)
            paths.append(p)
        manifest = tmp_path / "mix.manifest"
        write_manifest(manifest, ds, paths)
        setting, n_expert, n_corr, members = read_manifest(manifest)
        assert setting is MixSetting.ODSS and (n_expert, n_corr) == (2, 1)
        assert len(members) == 3
        for digest, name in members:
            assert digest == file_sha256(tmp_path / name)

    def test_bad_manifest_header(self, tmp_path):
        path = tmp_path / "bad.manifest"
        path.write_text("hello world\n")
        with pytest.raises(FileFormatError, match=r"bad\.manifest:1"):
            read_manifest(path)
