"""Panel I/O, rank transform, and fit-document serialization."""

import numpy as np
import pytest
from scipy import stats

from scarvine.copulas import Family
from scarvine.edgefit import EdgeModel, Mode, independence_edge
from scarvine.eis import EisConfig
from scarvine.latent import ScarParams
from scarvine.panels import (
    RawPanel,
    load_fit,
    load_panel,
    load_uniform_panel,
    rank_pit,
    save_fit,
    save_panel,
    save_tau_paths,
)
from scarvine.vine import DvineFit, DvineSpec


def test_rank_pit_simple_column():
    panel = RawPanel(values=np.array([[3.0], [1.0], [2.0]]), labels=["x"])
    out = rank_pit(panel)
    np.testing.assert_allclose(out.values[:, 0], [0.75, 0.25, 0.50])


def test_rank_pit_idempotent_on_orderings():
    rng = np.random.default_rng(0)
    panel = RawPanel(values=rng.standard_normal((40, 3)), labels=["a", "b", "c"])
    once = rank_pit(panel)
    twice = rank_pit(once)
    np.testing.assert_array_equal(once.values, twice.values)


def test_rank_pit_preserves_kendall_tau():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(200)
    y = 0.6 * x + rng.standard_normal(200)
    panel = RawPanel(values=np.column_stack([x, y]), labels=["x", "y"])
    out = rank_pit(panel)
    before = stats.kendalltau(x, y).statistic
    after = stats.kendalltau(out.values[:, 0], out.values[:, 1]).statistic
    assert after == pytest.approx(before, abs=1e-12)


def test_rank_pit_output_bounds():
    rng = np.random.default_rng(2)
    T = 37
    panel = RawPanel(values=rng.standard_normal((T, 2)), labels=["a", "b"])
    out = rank_pit(panel)
    assert out.values.min() == pytest.approx(1.0 / (T + 1))
    assert out.values.max() == pytest.approx(T / (T + 1.0))


def test_rank_pit_rejects_constant_column():
    panel = RawPanel(values=np.column_stack([np.ones(10), np.arange(10.0)]), labels=["a", "b"])
    with pytest.raises(ValueError, match="'a'"):
        rank_pit(panel)


def test_panel_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    panel = RawPanel(values=rng.standard_normal((25, 3)), labels=["one", "two", "three"])
    path = tmp_path / "panel.csv"
    save_panel(panel, path)
    back = load_panel(path)
    assert back.labels == panel.labels
    np.testing.assert_array_equal(back.values, panel.values)


def test_uniform_panel_rejects_out_of_range(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("a,b\n0.2,0.5\n1.0,0.4\n")
    with pytest.raises(ValueError) as err:
        load_uniform_panel(path)
    assert "line 3" in str(err.value)
    assert "'a'" in str(err.value)


def test_csv_missing_cell_reported_with_position(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.2,\n")
    with pytest.raises(ValueError, match="line 2"):
        load_panel(path)


def test_csv_ragged_row_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("a,b\n0.2,0.3,0.4\n")
    with pytest.raises(ValueError, match="expected 2 fields"):
        load_panel(path)


def test_header_labels_survive_rank_pit_and_save(tmp_path):
    rng = np.random.default_rng(4)
    panel = RawPanel(values=rng.standard_normal((15, 2)), labels=["SPX", "DAX"])
    out = rank_pit(panel)
    path = tmp_path / "u.csv"
    save_panel(out, path)
    assert load_uniform_panel(path).labels == ["SPX", "DAX"]


def make_fit():
    edges = {
        (1, 1): EdgeModel(
            family=Family.GAUSSIAN, mode=Mode.TIME_VARYING,
            scar=ScarParams(0.5123456789, 0.9512345678, 0.1512345678),
            loglik=123.456789, n_params=3, bic=-226.1234, converged=True,
        ),
        (1, 2): EdgeModel(
            family=Family.SURVIVAL_GUMBEL, mode=Mode.STATIC,
            theta=2.3456789, loglik=88.25, n_params=1, bic=-170.0, converged=False,
        ),
        (2, 1): independence_edge(500),
    }
    spec = DvineSpec(ordering=["x", "y", "z"], edges=edges, max_tv_tree=1, trunc_tree=2)
    return DvineFit(spec=spec, tree_bic=[-396.1234, 0.0], seed=42,
                    config=EisConfig(n_traj=100, seed=42))


def test_fit_document_roundtrip(tmp_path):
    fit = make_fit()
    path = tmp_path / "fit.json"
    save_fit(fit, path)
    back = load_fit(path)
    assert back.spec.ordering == fit.spec.ordering
    assert back.spec.max_tv_tree == fit.spec.max_tv_tree
    assert back.spec.trunc_tree == fit.spec.trunc_tree
    assert back.spec.edges == fit.spec.edges
    assert back.tree_bic == fit.tree_bic
    assert back.seed == fit.seed
    assert back.config.n_traj == fit.config.n_traj
    assert back.total_bic == pytest.approx(fit.total_bic)


def test_fit_document_rejects_garbage(tmp_path):
    path = tmp_path / "nope.json"
    path.write_text("{not json")
    with pytest.raises(ValueError, match="line 1"):
        load_fit(path)
    path2 = tmp_path / "other.json"
    path2.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError, match="not a"):
        load_fit(path2)


def test_tau_path_csv(tmp_path):
    path = tmp_path / "tau.csv"
    save_tau_paths({"x~y": np.array([0.1, 0.2]), "y~z": np.array([0.3, 0.4])}, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,x~y,y~z"
    assert lines[1].startswith("1,0.1")
    assert len(lines) == 3
