"""Monte Carlo harness: scenarios, replication loop, report structure."""

import math

import pytest

from scarvine.benchmark import (
    Scenario,
    builtin_scenario,
    run_scenario,
    scenario_edge_plan,
    write_mc_report,
)
from scarvine.copulas import Family
from scarvine.edgefit import EdgeModel, Mode, independence_edge
from scarvine.latent import ScarParams
from scarvine.vine import DvineSpec


def small_static_scenario(R=10, T=200):
    edges = {
        (1, 1): EdgeModel(family=Family.GAUSSIAN, mode=Mode.STATIC, theta=0.6, n_params=1),
        (1, 2): EdgeModel(family=Family.CLAYTON, mode=Mode.STATIC, theta=1.5, n_params=1),
        (2, 1): independence_edge(T),
    }
    spec = DvineSpec(ordering=["1", "2", "3"], edges=edges, max_tv_tree=0, trunc_tree=1)
    return Scenario(name="small-static", spec=spec, T=T, replications=R)


def test_builtin_scenarios_construct():
    for name in [
        "table1-gauss-15", "table1-clayton-15", "table1-gumbel-15",
        "table1-gauss-05", "table1-clayton-05", "table1-gumbel-05",
        "table2-gauss-mixed", "table2-clayton-mixed", "table2-gumbel-mixed",
        "table3-mixed", "all-independence",
    ]:
        s = builtin_scenario(name)
        s.spec.validate()
        assert s.T == 1000
    with pytest.raises(ValueError):
        builtin_scenario("table9-nope")


def test_table1_scenario_shape():
    s = builtin_scenario("table1-gauss-15")
    assert s.spec.dim == 4
    assert len(s.spec.edges) == 6
    assert all(e.mode is Mode.TIME_VARYING for e in s.spec.edges.values())
    assert all(e.scar == ScarParams(0.5, 0.95, 0.15) for e in s.spec.edges.values())


def test_table2_scenario_static_levels():
    s = builtin_scenario("table2-gauss-mixed")
    assert s.spec.edges[(1, 1)].mode is Mode.TIME_VARYING
    for key, mu in [((2, 1), 0.5), ((2, 2), 0.3), ((3, 1), 0.2)]:
        edge = s.spec.edges[key]
        assert edge.mode is Mode.STATIC
        from scarvine.copulas import theta_to_tau

        assert math.atanh(theta_to_tau(edge.family, edge.theta)) == pytest.approx(mu, abs=1e-12)


def test_edge_plan_covers_every_edge():
    s = builtin_scenario("table2-gauss-mixed")
    plan = scenario_edge_plan(s.spec)
    assert set(plan) == set(s.spec.edges)
    assert plan[(1, 1)] == ("tv", Family.GAUSSIAN)
    assert plan[(2, 1)][0] == "static"


def test_run_scenario_static_recovery_and_report(tmp_path):
    scenario = small_static_scenario()
    report = run_scenario(scenario, seed=101, workers=2)
    assert report.replications == 10
    assert report.n_failures == 0
    # independence edge reports no parameters
    assert {r.index for r in report.rows} == {"12", "23"}
    for row in report.rows:
        mu = "mu"
        assert row.se_bias[mu] >= 0.0
        # Jensen identity holds exactly by construction
        assert row.rel_mse[mu] >= row.rel_bias[mu] ** 2 - 1e-15
        # static rows carry mu only
        assert set(row.true_values) == {"mu"}
        assert row.sn == math.inf and row.avar == 0.0
        # recovery should be decent at T=200, R=10
        assert abs(row.rel_bias[mu]) < 0.25
    out = tmp_path / "report.csv"
    write_mc_report(report, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("index,family,mode,true_mu,true_phi,true_sigma,bias_mu")
    assert len(lines) == 3


def test_run_scenario_bit_reproducible():
    scenario = small_static_scenario()
    r1 = run_scenario(scenario, seed=55, workers=1)
    r2 = run_scenario(scenario, seed=55, workers=2)
    for a, b in zip(r1.rows, r2.rows):
        assert a == b


def test_run_scenario_tv_plumbing():
    edges = {
        (1, 1): EdgeModel(
            family=Family.GAUSSIAN, mode=Mode.TIME_VARYING,
            scar=ScarParams(0.5, 0.9, 0.2), n_params=3,
        )
    }
    spec = DvineSpec(ordering=["1", "2"], edges=edges, max_tv_tree=1, trunc_tree=1)
    scenario = Scenario(name="tiny-tv", spec=spec, T=120, replications=10)
    report = run_scenario(scenario, seed=77, workers=2)
    row = report.row("12")
    assert set(row.true_values) == {"mu", "phi", "sigma"}
    assert row.sn == pytest.approx(ScarParams(0.5, 0.9, 0.2).sn)
    assert row.avar == pytest.approx(ScarParams(0.5, 0.9, 0.2).avar)
    for p in ("mu", "phi", "sigma"):
        assert row.rel_mse[p] >= row.rel_bias[p] ** 2 - 1e-15


def test_run_scenario_requires_ten_replications():
    scenario = small_static_scenario(R=5)
    with pytest.raises(ValueError):
        run_scenario(scenario, seed=1)
