"""Panel ingestion, the rank probability integral transform, and
serialization of specs, fits, and tau paths."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .copulas import Family
from .edgefit import EdgeModel, Mode
from .eis import EisConfig
from .latent import ScarParams

FIT_DOC_FORMAT = "dvine-scar-fit"
FIT_DOC_VERSION = 1


@dataclass
class RawPanel:
    """T x d real matrix (returns or residuals) with column labels."""

    values: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("panel values must be a 2-D matrix")
        T, d = self.values.shape
        if T < 2:
            raise ValueError("panel needs at least 2 rows")
        if len(self.labels) != d:
            raise ValueError("one label per column required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("panel contains missing or non-finite values")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class UniformPanel(RawPanel):
    """Copula data: every entry strictly inside (0, 1)."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values <= 0.0) or np.any(self.values >= 1.0):
            raise ValueError("uniform panel entries must lie strictly inside (0, 1)")

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]


def rank_pit(raw: RawPanel) -> UniformPanel:
    """Nonparametric probability integral transform: rank / (T + 1).

    Average ranks break ties; the T+1 denominator keeps the output strictly
    inside (0, 1).  Invariant to strictly increasing marginal transforms.
    """
    T = raw.T
    out = np.empty_like(raw.values)
    for k in range(raw.dim):
        col = raw.values[:, k]
        if np.all(col == col[0]):
            raise ValueError(f"column {raw.labels[k]!r} is constant; cannot rank-transform")
        out[:, k] = rankdata(col, method="average") / (T + 1.0)
    return UniformPanel(values=out, labels=list(raw.labels))


# ---------------------------------------------------------------------------
# CSV panels
# ---------------------------------------------------------------------------

def _read_csv_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        labels = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(labels):
                raise ValueError(
                    f"{path}: line {lineno}: expected {len(labels)} fields, got {len(row)}"
                )
            parsed = []
            for k, cell in enumerate(row):
                cell = cell.strip()
                if not cell:
                    raise ValueError(f"{path}: line {lineno}: missing value in column {labels[k]!r}")
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: column {labels[k]!r}: not a number: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), labels


def load_panel(path) -> RawPanel:
    """Read a headered CSV of real values."""
    values, labels = _read_csv_matrix(path)
    return RawPanel(values=values, labels=labels)


def load_uniform_panel(path) -> UniformPanel:
    """Read a headered CSV of copula data, rejecting out-of-range cells."""
    values, labels = _read_csv_matrix(path)
    bad = np.argwhere((values <= 0.0) | (values >= 1.0))
    if bad.size:
        r, c = bad[0]
        raise ValueError(
            f"{path}: line {r + 2}: column {labels[c]!r}: value {values[r, c]!r} "
            "is outside the open interval (0, 1)"
        )
    return UniformPanel(values=values, labels=labels)


def save_panel(panel: RawPanel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.labels)
        for row in panel.values:
            writer.writerow([repr(float(x)) for x in row])


def save_tau_paths(tau_by_edge: dict[str, np.ndarray], path) -> None:
    """Write columns t, then one smoothed-tau series per edge label."""
    if not tau_by_edge:
        raise ValueError("no tau paths to write")
    labels = list(tau_by_edge)
    T = len(next(iter(tau_by_edge.values())))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + labels)
        for t in range(T):
            writer.writerow([t + 1] + [repr(float(tau_by_edge[lab][t])) for lab in labels])


# ---------------------------------------------------------------------------
# Fit / spec documents (JSON)
# ---------------------------------------------------------------------------

def _edge_to_doc(spec, key, edge: EdgeModel) -> dict:
    tree, position = key
    left, right = spec.conditioned_labels(tree, position)
    doc = {
        "tree": tree,
        "position": position,
        "conditioned": [left, right],
        "conditioning": spec.conditioning_labels(tree, position),
        "family": edge.family.value,
        "mode": edge.mode.value,
        "parameters": {},
        "loglik": edge.loglik,
        "n_params": edge.n_params,
        "bic": edge.bic,
        "converged": edge.converged,
    }
    if edge.mode is Mode.TIME_VARYING:
        doc["parameters"] = {"mu": edge.scar.mu, "phi": edge.scar.phi, "sigma": edge.scar.sigma}
    elif edge.mode is Mode.STATIC:
        doc["parameters"] = {"theta": edge.theta}
    return doc


def _edge_from_doc(doc: dict) -> tuple[tuple[int, int], EdgeModel]:
    mode = Mode(doc["mode"])
    family = Family.from_code(doc["family"])
    params = doc.get("parameters", {})
    scar = None
    theta = None
    if mode is Mode.TIME_VARYING:
        scar = ScarParams(mu=params["mu"], phi=params["phi"], sigma=params["sigma"])
    elif mode is Mode.STATIC:
        theta = params["theta"]
    edge = EdgeModel(
        family=family,
        mode=mode,
        scar=scar,
        theta=theta,
        loglik=doc.get("loglik", 0.0),
        n_params=doc.get("n_params", {"time-varying": 3, "static": 1, "independence": 0}[mode.value]),
        bic=doc.get("bic", 0.0),
        converged=doc.get("converged", True),
    )
    return (doc["tree"], doc["position"]), edge


def save_fit(fit, path) -> None:
    """Serialize a fitted vine (or a bare spec wrapped in DvineFit) to JSON."""
    spec = fit.spec
    doc = {
        "format": FIT_DOC_FORMAT,
        "version": FIT_DOC_VERSION,
        "seed": fit.seed,
        "config": {
            "n_traj": fit.config.n_traj,
            "max_fixed_point_iters": fit.config.max_fixed_point_iters,
            "fp_tolerance": fit.config.fp_tolerance,
        },
        "ordering": list(spec.ordering),
        "max_tv_tree": spec.max_tv_tree,
        "trunc_tree": spec.trunc_tree,
        "edges": [_edge_to_doc(spec, key, spec.edges[key]) for key in sorted(spec.edges)],
        "tree_bic": list(fit.tree_bic),
        "cumulative_bic": fit.cumulative_bic,
        "total_bic": fit.total_bic,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_fit(path):
    """Load a fit document back into a DvineFit (validates the spec)."""
    from .vine import DvineFit, DvineSpec

    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if doc.get("format") != FIT_DOC_FORMAT:
        raise ValueError(f"{path}: not a {FIT_DOC_FORMAT} document")
    edges = {}
    for edge_doc in doc["edges"]:
        key, edge = _edge_from_doc(edge_doc)
        edges[key] = edge
    spec = DvineSpec(
        ordering=list(doc["ordering"]),
        edges=edges,
        max_tv_tree=int(doc["max_tv_tree"]),
        trunc_tree=int(doc["trunc_tree"]),
    )
    spec.validate()
    cfg_doc = doc.get("config", {})
    config = EisConfig(
        n_traj=int(cfg_doc.get("n_traj", 100)),
        max_fixed_point_iters=int(cfg_doc.get("max_fixed_point_iters", 10)),
        fp_tolerance=float(cfg_doc.get("fp_tolerance", 1e-3)),
        seed=int(doc.get("seed", 0)),
    )
    return DvineFit(
        spec=spec,
        tree_bic=[float(x) for x in doc.get("tree_bic", [])],
        seed=int(doc.get("seed", 0)),
        config=config,
    )
