import io
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from pgg_evo.analytic import OTHERS, FocalContext, v_err
from pgg_evo.errors import DomainError
from pgg_evo.game import EnvParams, GameParams, PopulationProfile
from pgg_evo.sim import (
    COOPERATORS, MORAN, SAMPLE, EpisodeConfig, SimConfig, drift_experiment, estimate_v,
    evolve, mcnemar_one_sided, run_episode, semantics_gap,
)
from pgg_evo.statespace import LITERAL

P10 = GameParams(10, 10, 5)
ENV = EnvParams(0.9, 0.05)


def test_full_cooperation_episode():
    for seed in range(20):
        out = run_episode(EpisodeConfig((9,) * 10, P10, EnvParams(0.9, 0.0), seed=seed))
        assert out.payoffs == (5.0 * out.rounds,) * 10
        assert out.cooperations == 10 * out.rounds


def test_lone_defector_episode():
    for seed in range(20):
        out = run_episode(EpisodeConfig((9,) * 9 + (10,), P10, EnvParams(0.9, 0.0), seed=seed))
        assert out.payoffs[-1] == 9.0
        assert out.payoffs[0] == 4.0


def test_all_defectors_episode():
    out = run_episode(EpisodeConfig((10,) * 10, P10, ENV, seed=3))
    assert out.payoffs == (0.0,) * 10 and out.cooperations == 0


def test_episode_config_validation():
    with pytest.raises(DomainError):
        EpisodeConfig((9,) * 9, P10, ENV)
    with pytest.raises(DomainError):
        EpisodeConfig((9,) * 10, P10, EnvParams(1.0, 0.05))
    with pytest.raises(DomainError):
        EpisodeConfig((9,) * 10, P10, ENV, semantics="quantum")


def test_episode_is_seed_determined():
    cfg = EpisodeConfig((9, 8, 7, 6, 5, 4, 3, 2, 1, 10), P10, ENV, semantics=LITERAL, seed=42)
    assert run_episode(cfg) == run_episode(cfg)


def test_estimate_examples():
    a = estimate_v(9, 9, P10, ENV, 100_000, seed=1)
    assert abs(a.z(v_err(FocalContext(9, 9), P10, ENV))) < 3
    assert abs(a.mean - 10.30) < 3 * a.se + 0.01
    b = estimate_v(9, 10, P10, ENV, 100_000, seed=1)
    assert abs(b.z(8.55)) < 3
    with pytest.raises(DomainError):
        estimate_v(9, 9, P10, ENV, 999)


def test_oracle_prefers_group_pool():
    # the two bookkeeping variants for a softer mutant differ by far more than the noise
    params, env = GameParams(4, 4.0, 2.0), EnvParams(0.95, 0.05)
    est = estimate_v(3, 0, params, env, 100_000, seed=7)
    assert abs(est.z(v_err(FocalContext(3, 0), params, env))) < 3
    assert abs(est.z(v_err(FocalContext(3, 0, mistake_pool=OTHERS), params, env))) > 20
    est = estimate_v(9, 8, P10, EnvParams(0.95, 0.05), 100_000, seed=7)
    assert abs(est.z(v_err(FocalContext(9, 8), P10, EnvParams(0.95, 0.05)))) < 3
    assert abs(est.z(v_err(FocalContext(9, 8, mistake_pool=OTHERS), P10, EnvParams(0.95, 0.05)))) > 3


def test_semantics_gap_is_reported():
    gap = semantics_gap(9, 8, P10, ENV, 20_000, seed=2)
    assert gap.difference.mean == pytest.approx(gap.literal.mean - gap.absorbing.mean, abs=1e-9)
    # literal observers forgive a breakdown, so cooperation lasts longer on average
    assert gap.difference.mean > 5 * gap.difference.se


def test_estimate_z_degenerate():
    est = estimate_v(10, 10, P10, ENV, 1000)
    assert est.se == 0.0 and est.z(0.0) == 0.0 and est.z(1.0) == -math.inf


def _cfg(**kw):
    base = dict(size=50, params=GameParams(5, 5.0, 2.5), env=EnvParams(0.9, 0.05),
                generations=60, episodes_per_generation=2, seed=3)
    base.update(kw)
    return SimConfig(**base)


def test_trace_bookkeeping():
    tr = evolve(_cfg(mutation_rate=0.05))
    assert tr.counts.shape == (60, 6)
    assert np.all(tr.counts.sum(axis=1) == 50)
    assert np.allclose(tr.frequencies.sum(axis=1), 1.0, atol=1e-15)
    assert tr.final_counts.sum() == 50
    present = tr.counts > 0
    assert np.all(np.isfinite(tr.mean_payoff[present]))
    assert np.all(np.isnan(tr.mean_payoff[~present]))


def test_trace_is_reproducible():
    a, b = evolve(_cfg(mutation_rate=0.05)), evolve(_cfg(mutation_rate=0.05))
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    c = evolve(_cfg(mutation_rate=0.05, seed=4))
    assert c.to_csv() != a.to_csv()


def test_trace_serialisation():
    tr = evolve(_cfg(generations=10, record_every=5))
    lines = tr.to_csv().splitlines()
    assert lines[0] == "generation,k,frequency,mean_payoff"
    assert len(lines) == 1 + 2 * 6
    summary = json.loads(tr.to_json())
    assert summary["config"]["size"] == 50
    assert sum(summary["final_frequencies"].values()) == pytest.approx(1.0)


def test_defector_population_is_absorbing():
    tr = evolve(_cfg(mutation_rate=0.0, initial=PopulationProfile.monomorphic(5)))
    assert np.all(tr.counts[:, 5] == 50)
    assert tr.takeover_generation == 0


def test_cooperator_kernel_never_creates_defectors():
    tr = evolve(_cfg(mutation_rate=0.2, kernel=COOPERATORS))
    assert np.all(tr.counts[:, 5] == 0) and tr.final_counts[5] == 0


def test_moran_and_sampling_run():
    for kw in ({"rule": MORAN}, {"grouping": SAMPLE, "size": 23}):
        tr = evolve(_cfg(mutation_rate=0.05, **kw))
        assert np.all(tr.counts.sum(axis=1) == tr.size)


def test_events_are_recorded():
    tr = evolve(_cfg(mutation_rate=0.0, env=EnvParams(0.9, 0.6), generations=200,
                     initial=PopulationProfile({4: 0.9, 5: 0.1})))
    # beyond every band only defection survives
    assert tr.final_counts[5] == 50
    assert tr.first_event("fixation", 5) is not None
    assert tr.first_event("invasion", 5) is not None
    assert tr.takeover_generation <= tr.first_event("fixation", 5)


def test_high_error_rate_collapses_cooperation():
    cfg = SimConfig(100, P10, EnvParams(0.9, 0.6), generations=2000, episodes_per_generation=10,
                    seed=11)
    for t in range(3):
        tr = evolve(replace(cfg, seed=t))
        assert tr.final_counts[10] >= 95


def test_sim_config_validation():
    with pytest.raises(DomainError):
        _cfg(size=52)
    with pytest.raises(DomainError):
        _cfg(mutation_rate=1.5)
    with pytest.raises(DomainError):
        _cfg(selection=-1)
    with pytest.raises(DomainError):
        _cfg(rule="replicator")
    with pytest.raises(DomainError):
        _cfg(env=EnvParams(1.0, 0.05))
    with pytest.raises(DomainError):
        _cfg(initial=PopulationProfile({7: 1.0}))


def test_drift_experiment_validation():
    with pytest.raises(DomainError):
        drift_experiment(_cfg(), 0)
    with pytest.raises(DomainError):
        drift_experiment(_cfg(), 29)
    with pytest.raises(DomainError):
        drift_experiment(_cfg(env=EnvParams(0.9, 0.0)), 30)


def test_mcnemar():
    assert mcnemar_one_sided(0, 0) == 1.0
    assert mcnemar_one_sided(5, 0) == pytest.approx(1 / 32)
    assert mcnemar_one_sided(3, 3) == pytest.approx(42 / 64)
    assert mcnemar_one_sided(0, 4) == 1.0


def test_small_drift_experiment_runs():
    cfg = SimConfig(20, GameParams(4, 4.0, 2.0), EnvParams(0.9, 0.05), generations=20,
                    episodes_per_generation=1, seed=5, stop_at_takeover=True)
    out = drift_experiment(cfg, 30)
    assert out.trials == 30 and len(out.error_free.takeovers) == 30
    assert 0 <= out.p_value <= 1
    json.dumps(out.to_json())
