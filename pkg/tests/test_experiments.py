import json
import math

import numpy as np
import pytest

from nurgg.experiments import (
    COLUMNS,
    ExperimentConfig,
    config_from_metadata,
    load,
    persist,
    run_connectivity,
    run_cutoff_sweep,
    run_degree_sweep,
    run_poisson_limit,
    run_sweep,
    rows_to_csv,
    summarize,
    trend_nonincreasing,
)
from nurgg.sampling import replicate_seed

UNIF = {"kind": "uniform_cube", "dimension": 2}
C_INT = {"kind": "radial_interior", "dimension": 2, "p": 1}
PROD = {"kind": "product", "dimension": 2, "marginals": [{"name": "uniform"}, {"name": "uniform"}]}


def _cfg(experiment, **kw):
    base = dict(experiment=experiment, density=UNIF, norm="inf", n_list=[200, 400], replicates=3, base_seed=7)
    if experiment == "connectivity":
        base["density"] = PROD
    base.update(kw)
    return ExperimentConfig(**base)


def test_header_matches_schema():
    assert COLUMNS == ("experiment", "replicate", "n", "N", "c_or_beta", "W", "W_tilde",
                       "d_n", "d_tilde_n", "Delta", "delta", "connected")
    res = run_cutoff_sweep(_cfg("cutoff", replicates=1, n_list=[100]))
    assert rows_to_csv(res.rows).splitlines()[0] == ",".join(COLUMNS)


@pytest.mark.parametrize("experiment", ["cutoff", "poisson", "degree", "connectivity"])
def test_deterministic_rerun(experiment):
    a = run_sweep(_cfg(experiment, replicates=1))
    b = run_sweep(_cfg(experiment, replicates=1))
    assert rows_to_csv(a.rows) == rows_to_csv(b.rows)
    assert a.aggregates == b.aggregates


def test_worker_count_does_not_change_output(tmp_path):
    one = run_sweep(_cfg("cutoff", workers=1))
    two = run_sweep(_cfg("cutoff", workers=2))
    p1, j1 = persist(one, tmp_path / "a" / "cut")
    p2, j2 = persist(two, tmp_path / "b" / "cut")
    assert p1.read_bytes() == p2.read_bytes()
    s1, s2 = json.loads(j1.read_text()), json.loads(j2.read_text())
    s1["config"].pop("workers"), s2["config"].pop("workers")
    assert s1 == s2


def test_persist_roundtrip(tmp_path):
    for exp in ("cutoff", "poisson", "degree", "connectivity"):
        res = run_sweep(_cfg(exp, replicates=2))
        persist(res, tmp_path / exp)
        back = load(tmp_path / exp)
        assert back.rows == res.rows
        assert back.aggregates == json.loads(json.dumps(res.aggregates))
        assert back.experiment == exp
        assert back.timing["backend"] == res.timing["backend"]
        assert config_from_metadata(back.metadata) == _cfg(exp, replicates=2)


def test_sidecar_seeds(tmp_path):
    cfg = _cfg("poisson", beta=0.5)
    res = run_poisson_limit(cfg)
    _, j = persist(res, tmp_path / "p.csv")
    side = json.loads(j.read_text())
    assert side["base_seed"] == 7
    assert side["schema_version"] == 1
    for i, n in enumerate(cfg.n_list):
        assert side["seeds"][repr(float(n))] == [replicate_seed(7, i, r) for r in range(3)]
    assert (tmp_path / "p.timing.json").exists()


def test_aggregates_recomputed_from_rows(tmp_path):
    res = run_degree_sweep(_cfg("degree", c=1.5, replicates=5))
    persist(res, tmp_path / "d")
    back = load(tmp_path / "d")
    for n in (200.0, 400.0):
        agg = back.aggregate(n)
        for col in ("Delta", "delta", "W", "N"):
            v = back.column(col, n)
            assert abs(v.mean() - agg[col]["mean"]) <= 1e-12
            assert abs(v.std(ddof=1) / math.sqrt(len(v)) - agg[col]["se"]) <= 1e-12


def test_unattainable_rows_excluded_and_listed():
    # at n = 1.5 most realisations have fewer than two points
    res = run_cutoff_sweep(_cfg("cutoff", n_list=[1.5], replicates=30))
    ex = res.metadata["excluded_unattainable"]
    assert len(ex) > 0
    assert len(ex) + len(res.rows) == 30
    assert all(e["N"] < 2 for e in ex)
    assert res.aggregate(1.5)["rows"] == len(res.rows)
    assert res.aggregate(1.5)["d_n"]["count"] == len(res.rows)


def test_failures_recorded(monkeypatch):
    import nurgg.experiments as ex

    real = ex.run_cell

    def flaky(cfg, i, r):
        if r == 1:
            raise RuntimeError("boom")
        return real(cfg, i, r)

    monkeypatch.setattr(ex, "run_cell", flaky)
    res = run_sweep(_cfg("poisson"))
    assert len(res.metadata["failures"]) == 2
    assert {f["replicate"] for f in res.metadata["failures"]} == {1}
    assert len(res.rows) == 4


def test_cutoff_rows_ordered():
    res = run_cutoff_sweep(_cfg("cutoff"))
    for r in res.rows:
        assert r["d_tilde_n"] <= r["d_n"]
        assert r["c_or_beta"] is None


def test_poisson_aggregate_fields():
    res = run_poisson_limit(_cfg("poisson", beta=1.0, replicates=20))
    agg = res.aggregate(400)
    assert agg["lambda"] == pytest.approx(math.exp(-1))
    assert sum(agg["histogram"]) == 20
    assert 0 <= agg["tv_to_poisson"] <= 1


def test_degree_aggregate_fields():
    res = run_degree_sweep(_cfg("degree", c=0.5))
    agg = res.aggregate(400)
    assert agg["lower_bound"] is None and agg["lower_violation_rate"] is None
    assert agg["expected_mean_out_degree"] == pytest.approx(0.5 * math.log(400))
    assert agg["mean_out_degree"]["count"] == 3


def test_connectivity_epsilon_column():
    res = run_connectivity(_cfg("connectivity", epsilon=0.3))
    assert all(r["c_or_beta"] == 0.3 and r["connected"] in (0, 1) for r in res.rows)
    assert 0.0 <= res.aggregate(200)["connected_fraction"] <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg("spectral")
    with pytest.raises(ValueError):
        _cfg("cutoff", n_list=[400, 200])
    with pytest.raises(ValueError):
        _cfg("poisson", n_list=[2], beta=-5)
    with pytest.raises(ValueError):
        _cfg("connectivity", density=C_INT)
    with pytest.raises(ValueError):
        _cfg("connectivity", norm="2")
    with pytest.raises(ValueError):
        _cfg("degree", c=0)
    with pytest.raises(ValueError):
        _cfg("cutoff", replicates=0)
    with pytest.raises(ValueError):
        run_degree_sweep(_cfg("cutoff"))


def test_summarize_and_trend():
    s = summarize(np.array([1.0, 2.0, 3.0]))
    assert s["mean"] == 2.0 and s["se"] == pytest.approx(1 / math.sqrt(3))
    assert summarize(np.array([]))["mean"] is None
    assert summarize(np.array([4.0]))["se"] is None
    assert trend_nonincreasing([3, 2, 2, 1])
    assert not trend_nonincreasing([1, 2])
    assert trend_nonincreasing([1, 1.05], slack=0.1)


def test_c_int_cutoff_runs():
    res = run_cutoff_sweep(_cfg("cutoff", density=C_INT, norm="2", n_list=[300], replicates=2))
    assert len(res.rows) == 2
    assert all(r["d_n"] > 0 for r in res.rows)
