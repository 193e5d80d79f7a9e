"""D-vine engine: variable ordering, sequential tree-by-tree estimation,
density evaluation, and simulation.

Ordered variables x_1..x_d form a chain; tree j couples variables j steps
apart given everything in between.  Estimation walks the trees in order,
passing h-transformed pseudo-observations from each tree to the next; the
pair fed to tree j, position p is

    a_p = F(x_p | x_{p+1..p+j-1}),   b_p = F(x_{p+j} | x_{p+1..p+j-1})

with the recursions a'_p = h(a_p | b_p) and b'_p = h(b_{p+1} | a_{p+1}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .copulas import (
    SELECTABLE_FAMILIES,
    Family,
    clamp_unit,
    h_func,
    h_inverse,
    log_pair_density,
    theta_from_latent,
)
from .edgefit import (
    CandidateScore,
    EdgeModel,
    Mode,
    fit_scar_edge,
    fit_static_edge,
    independence_edge,
    select_edge_model,
)
from .eis import EisConfig, TrajectorySet, eis_fixed_point, log_mean_weight, make_base_noise
from .latent import simulate_path

LEFT_GIVEN_RIGHT = "left-given-right"
RIGHT_GIVEN_LEFT = "right-given-left"


# ---------------------------------------------------------------------------
# Dependence measurement and variable ordering
# ---------------------------------------------------------------------------

def empirical_kendall_tau(x, y) -> float:
    """Kendall's tau: (concordant - discordant) / (T choose 2), ties count zero."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    T = len(x)
    if T < 2 or len(y) != T:
        raise ValueError("need two equal-length series with at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("Kendall's tau is undefined for a constant series")
    total = 0.0
    for i in range(T - 1):
        total += float(np.sum(np.sign(x[i] - x[i + 1 :]) * np.sign(y[i] - y[i + 1 :])))
    return total / (T * (T - 1) / 2.0)


def order_variables(panel) -> list[str]:
    """Greedy chain: seed with the max-|tau| pair, then repeatedly attach the
    unused variable with the largest |tau| to either chain end (a first tree
    of a D-vine is a path, so only endpoint attachment is possible).  Ties
    break toward the smaller column index.
    """
    values = panel.values
    labels = list(panel.labels)
    d = len(labels)
    if d < 2:
        raise ValueError("ordering requires at least 2 variables")
    tau = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            tau[i, j] = tau[j, i] = abs(empirical_kendall_tau(values[:, i], values[:, j]))
    best = (-1.0, 0, 1)
    for i in range(d):
        for j in range(i + 1, d):
            if tau[i, j] > best[0]:
                best = (tau[i, j], i, j)
    chain = [best[1], best[2]]
    unused = [k for k in range(d) if k not in chain]
    while unused:
        pick = None  # (tau, candidate, at_head)
        for cand in unused:
            for at_head, endpoint in ((True, chain[0]), (False, chain[-1])):
                score = tau[cand, endpoint]
                if pick is None or score > pick[0]:
                    pick = (score, cand, at_head)
        _, cand, at_head = pick
        if at_head:
            chain.insert(0, cand)
        else:
            chain.append(cand)
        unused.remove(cand)
    return [labels[k] for k in chain]


# ---------------------------------------------------------------------------
# Model structure
# ---------------------------------------------------------------------------

@dataclass
class DvineSpec:
    """A fully specified D-vine: variable chain plus one model per edge.

    Edge keys are (tree, position), both 1-based; tree j, position p couples
    ordered variables (p, p+j) given those in between.  Trees above
    trunc_tree are recorded explicitly as independence edges so the density
    stays a complete product.
    """

    ordering: list[str]
    edges: dict[tuple[int, int], EdgeModel]
    max_tv_tree: int
    trunc_tree: int

    @property
    def dim(self) -> int:
        return len(self.ordering)

    @property
    def n_parameters(self) -> int:
        return sum(e.n_params for e in self.edges.values())

    def edges_in_tree(self, tree: int) -> list[EdgeModel]:
        return [self.edges[(tree, p)] for p in range(1, self.dim - tree + 1)]

    def conditioned_labels(self, tree: int, position: int) -> tuple[str, str]:
        return self.ordering[position - 1], self.ordering[position - 1 + tree]

    def conditioning_labels(self, tree: int, position: int) -> list[str]:
        return list(self.ordering[position : position + tree - 1])

    def validate(self) -> None:
        d = self.dim
        if not 0 <= self.max_tv_tree <= self.trunc_tree <= d - 1:
            raise ValueError("need 0 <= max_tv_tree <= trunc_tree <= d-1")
        for tree in range(1, d):
            for pos in range(1, d - tree + 1):
                if (tree, pos) not in self.edges:
                    raise ValueError(f"missing edge (tree={tree}, position={pos})")
                edge = self.edges[(tree, pos)]
                if tree > self.max_tv_tree and edge.mode is Mode.TIME_VARYING:
                    raise ValueError(f"edge {(tree, pos)} is time-varying above max_tv_tree")
                if tree > self.trunc_tree and edge.mode is not Mode.INDEPENDENCE:
                    raise ValueError(f"edge {(tree, pos)} must be independence above trunc_tree")
        if len(self.edges) != d * (d - 1) // 2:
            raise ValueError("edge map must cover every (tree, position) slot exactly")


@dataclass
class DvineFit:
    """Result of a sequential fit: the spec plus the per-tree BIC report."""

    spec: DvineSpec
    tree_bic: list[float]
    seed: int
    config: EisConfig
    candidate_scores: dict[tuple[int, int], list[CandidateScore]] = field(default_factory=dict)

    @property
    def cumulative_bic(self) -> list[float]:
        return list(np.cumsum(self.tree_bic))

    @property
    def total_bic(self) -> float:
        return float(sum(self.tree_bic))


def derive_edge_seed(seed: int, tree: int, position: int) -> int:
    """Deterministic per-edge seed so parallel execution is reproducible."""
    return int(np.random.SeedSequence([int(seed), int(tree), int(position)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Pseudo-observations
# ---------------------------------------------------------------------------

def pseudo_observations(
    u_pair: np.ndarray,
    edge: EdgeModel,
    trajectories: TrajectorySet | None = None,
    direction: str = LEFT_GIVEN_RIGHT,
) -> np.ndarray:
    """h-transform a pair into the next tree's pseudo-observations.

    Static edges apply h at the fitted parameter; time-varying edges average
    h over the trajectory-implied parameter paths (unweighted, matching the
    sequential estimation recipe); independence passes the conditioned column
    through unchanged.
    """
    u_pair = np.asarray(u_pair, dtype=float)
    if direction == LEFT_GIVEN_RIGHT:
        uj, uv = u_pair[:, 0], u_pair[:, 1]
    elif direction == RIGHT_GIVEN_LEFT:
        uj, uv = u_pair[:, 1], u_pair[:, 0]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if edge.mode is Mode.INDEPENDENCE:
        return clamp_unit(uj.copy())
    if edge.mode is Mode.STATIC:
        return clamp_unit(np.asarray(h_func(edge.family, uj, uv, edge.theta)))
    if trajectories is None:
        raise ValueError("time-varying pseudo-observations require trajectories")
    theta = theta_from_latent(edge.family, trajectories.paths)  # (N, T)
    hvals = h_func(edge.family, uj[None, :], uv[None, :], theta)
    return clamp_unit(hvals.mean(axis=0))


def _edge_trajectories(u_pair, edge: EdgeModel, config: EisConfig, base_noise) -> TrajectorySet:
    res = eis_fixed_point(edge.scar, u_pair, edge.family, config, base_noise=base_noise)
    return res.trajectories


# ---------------------------------------------------------------------------
# Sequential fitting
# ---------------------------------------------------------------------------

def _fit_edge_job(args):
    """Fit one edge and return it with both direction pseudo-observations."""
    (u_pair, families, allow_tv, config, edge_seed, plan) = args
    cfg = EisConfig(
        n_traj=config.n_traj,
        max_fixed_point_iters=config.max_fixed_point_iters,
        fp_tolerance=config.fp_tolerance,
        seed=edge_seed,
    )
    T = u_pair.shape[0]
    base_noise = None
    scores: list[CandidateScore] = []
    if plan is None:
        base_noise = make_base_noise(cfg, T) if allow_tv else None
        edge, scores = select_edge_model(
            u_pair, families, allow_tv=allow_tv, config=cfg, base_noise=base_noise
        )
    else:
        kind = plan[0]
        if kind == "independence":
            edge = independence_edge(T)
        elif kind == "static":
            edge = fit_static_edge(u_pair, plan[1])
        elif kind == "tv":
            base_noise = make_base_noise(cfg, T)
            edge = fit_scar_edge(u_pair, plan[1], cfg, base_noise=base_noise)
        else:
            raise ValueError(f"unknown edge plan {plan!r}")
    trajectories = None
    if edge.mode is Mode.TIME_VARYING:
        trajectories = _edge_trajectories(u_pair, edge, cfg, base_noise)
    left = pseudo_observations(u_pair, edge, trajectories, LEFT_GIVEN_RIGHT)
    right = pseudo_observations(u_pair, edge, trajectories, RIGHT_GIVEN_LEFT)
    return edge, left, right, scores


def fit_dvine(
    panel,
    families=SELECTABLE_FAMILIES,
    max_tv_tree: int = 1,
    trunc_tree: int | None = None,
    config: EisConfig | None = None,
    workers: int = 1,
    ordering: list[str] | None = None,
    edge_plan: dict[tuple[int, int], tuple] | None = None,
) -> DvineFit:
    """Sequential tree-by-tree estimation.

    Tree 1 is fit on adjacent ordered pairs, pseudo-observations propagate
    upward, and trees above trunc_tree are set to independence.  Edges within
    a tree are independent and fit in parallel; per-edge seeds derive from
    (config.seed, tree, position) so results do not depend on the worker
    count.  ``edge_plan`` pins (mode, family) per edge and skips model
    selection, which the Monte Carlo harness uses for pure parameter
    recovery.
    """
    config = config or EisConfig()
    values = panel.values
    labels = list(panel.labels)
    if ordering is not None:
        index = {lab: k for k, lab in enumerate(labels)}
        if sorted(ordering) != sorted(labels):
            raise ValueError("ordering must be a permutation of the panel labels")
        values = values[:, [index[lab] for lab in ordering]]
        labels = list(ordering)
    values = clamp_unit(np.asarray(values, dtype=float))
    d = values.shape[1]
    if trunc_tree is None:
        trunc_tree = d - 1
    if not 0 <= max_tv_tree <= trunc_tree <= d - 1:
        raise ValueError("need 0 <= max_tv_tree <= trunc_tree <= d-1")

    a = [values[:, p] for p in range(d - 1)]
    b = [values[:, p + 1] for p in range(d - 1)]
    edges: dict[tuple[int, int], EdgeModel] = {}
    scores: dict[tuple[int, int], list[CandidateScore]] = {}
    tree_bic: list[float] = []
    T = values.shape[0]

    for tree in range(1, d):
        n_edges = d - tree
        if tree > trunc_tree:
            # independence edges pass pseudo-observations through unchanged
            results = [(independence_edge(T), a[p], b[p], []) for p in range(n_edges)]
            new_a = [a[p] for p in range(n_edges - 1)]
            new_b = [b[p + 1] for p in range(n_edges - 1)]
        else:
            allow_tv = tree <= max_tv_tree
            jobs = []
            for p in range(n_edges):
                u_pair = np.column_stack([a[p], b[p]])
                plan = edge_plan.get((tree, p + 1)) if edge_plan is not None else None
                jobs.append(
                    (u_pair, tuple(families), allow_tv, config, derive_edge_seed(config.seed, tree, p + 1), plan)
                )
            results = parallel_map(_fit_edge_job, jobs, workers=workers)
            new_a = [results[p][1] for p in range(n_edges - 1)]
            new_b = [results[p + 1][2] for p in range(n_edges - 1)]
        for p in range(n_edges):
            edges[(tree, p + 1)] = results[p][0]
            if results[p][3]:
                scores[(tree, p + 1)] = results[p][3]
        tree_bic.append(sum(results[p][0].bic for p in range(n_edges)))
        a, b = new_a, new_b

    spec = DvineSpec(ordering=labels, edges=edges, max_tv_tree=max_tv_tree, trunc_tree=trunc_tree)
    spec.validate()
    return DvineFit(spec=spec, tree_bic=tree_bic, seed=config.seed, config=config, candidate_scores=scores)


# ---------------------------------------------------------------------------
# Density evaluation
# ---------------------------------------------------------------------------

def dvine_loglik(panel, spec: DvineSpec, config: EisConfig | None = None) -> float:
    """Log-likelihood of the panel under the spec, by the sequential
    decomposition: each edge contributes its own log-likelihood evaluated on
    that edge's pseudo-observation inputs."""
    config = config or EisConfig()
    spec.validate()
    index = {lab: k for k, lab in enumerate(panel.labels)}
    values = clamp_unit(np.asarray(panel.values, dtype=float)[:, [index[lab] for lab in spec.ordering]])
    d = spec.dim
    a = [values[:, p] for p in range(d - 1)]
    b = [values[:, p + 1] for p in range(d - 1)]
    total = 0.0
    for tree in range(1, d):
        n_edges = d - tree
        new_a, new_b = [], []
        lefts, rights = [], []
        for p in range(n_edges):
            edge = spec.edges[(tree, p + 1)]
            u_pair = np.column_stack([a[p], b[p]])
            trajectories = None
            if edge.mode is Mode.TIME_VARYING:
                cfg = EisConfig(
                    n_traj=config.n_traj,
                    max_fixed_point_iters=config.max_fixed_point_iters,
                    fp_tolerance=config.fp_tolerance,
                    seed=derive_edge_seed(config.seed, tree, p + 1),
                )
                res = eis_fixed_point(edge.scar, u_pair, edge.family, cfg)
                total += log_mean_weight(res.trajectories.log_weights)
                trajectories = res.trajectories
            elif edge.mode is Mode.STATIC:
                total += float(np.sum(log_pair_density(edge.family, a[p], b[p], edge.theta)))
            lefts.append(pseudo_observations(u_pair, edge, trajectories, LEFT_GIVEN_RIGHT))
            rights.append(pseudo_observations(u_pair, edge, trajectories, RIGHT_GIVEN_LEFT))
        for p in range(n_edges - 1):
            new_a.append(lefts[p])
            new_b.append(rights[p + 1])
        a, b = new_a, new_b
    return total


# ---------------------------------------------------------------------------
# Smoothed and implied dependence paths
# ---------------------------------------------------------------------------

def smoothed_tau_paths(panel, spec: DvineSpec, config: EisConfig | None = None):
    """Recompute trajectories at the fitted parameters for every time-varying
    edge and return its smoothed Kendall's tau series, keyed by (tree, position).

    Pseudo-observations are propagated exactly as in fitting, so edges above
    tree 1 are smoothed on their own inputs.
    """
    from .eis import smoothed_tau

    config = config or EisConfig()
    spec.validate()
    index = {lab: k for k, lab in enumerate(panel.labels)}
    values = clamp_unit(np.asarray(panel.values, dtype=float)[:, [index[lab] for lab in spec.ordering]])
    d = spec.dim
    a = [values[:, p] for p in range(d - 1)]
    b = [values[:, p + 1] for p in range(d - 1)]
    out: dict[tuple[int, int], np.ndarray] = {}
    for tree in range(1, d):
        n_edges = d - tree
        lefts, rights = [], []
        for p in range(n_edges):
            edge = spec.edges[(tree, p + 1)]
            u_pair = np.column_stack([a[p], b[p]])
            trajectories = None
            if edge.mode is Mode.TIME_VARYING:
                cfg = EisConfig(
                    n_traj=config.n_traj,
                    max_fixed_point_iters=config.max_fixed_point_iters,
                    fp_tolerance=config.fp_tolerance,
                    seed=derive_edge_seed(config.seed, tree, p + 1),
                )
                res = eis_fixed_point(edge.scar, u_pair, edge.family, cfg)
                trajectories = res.trajectories
                out[(tree, p + 1)] = smoothed_tau(trajectories)
            lefts.append(pseudo_observations(u_pair, edge, trajectories, LEFT_GIVEN_RIGHT))
            rights.append(pseudo_observations(u_pair, edge, trajectories, RIGHT_GIVEN_LEFT))
        a = [lefts[p] for p in range(n_edges - 1)]
        b = [rights[p + 1] for p in range(n_edges - 1)]
    return out


def implied_tau_path(
    spec: DvineSpec,
    tau_paths: dict[tuple[int, int], np.ndarray],
    label_a: str,
    label_b: str,
    mc_reps: int = 400,
    seed: int = 0,
) -> np.ndarray:
    """Implied pairwise Kendall's tau between two (possibly non-adjacent)
    variables, by Monte Carlo: at each period, freeze every edge at its
    current parameter and measure the sample tau of the simulated pair.
    """
    for lab in (label_a, label_b):
        if lab not in spec.ordering:
            raise ValueError(f"unknown variable {lab!r}")
    T = None
    for path in tau_paths.values():
        T = len(path) if T is None else T
        if len(path) != T:
            raise ValueError("tau paths must share one length")
    if T is None:
        raise ValueError("at least one time-varying path is required")
    ia, ib = spec.ordering.index(label_a), spec.ordering.index(label_b)
    out = np.empty(T)
    for t in range(T):
        edges_t = {}
        for key, edge in spec.edges.items():
            if edge.mode is Mode.TIME_VARYING:
                tau_t = float(tau_paths[key][t])
                theta = tau_to_theta_for_edge(edge.family, tau_t)
                edges_t[key] = EdgeModel(
                    family=edge.family, mode=Mode.STATIC, theta=theta, n_params=1
                )
            else:
                edges_t[key] = edge
        spec_t = DvineSpec(
            ordering=list(spec.ordering), edges=edges_t,
            max_tv_tree=0, trunc_tree=spec.trunc_tree,
        )
        panel_t, _ = simulate_dvine(
            spec_t, mc_reps,
            seed=int(np.random.SeedSequence([int(seed), 29, t]).generate_state(1)[0]),
        )
        out[t] = empirical_kendall_tau(panel_t.values[:, ia], panel_t.values[:, ib])
    return out


def tau_to_theta_for_edge(family: Family, tau: float) -> float:
    """tau -> theta with the latent-path clamping rule for positive families."""
    from .copulas import TAU_EPS, tau_to_theta

    if family.positive_only:
        tau = min(max(tau, TAU_EPS), 1.0 - TAU_EPS)
    else:
        tau = min(max(tau, -1.0 + TAU_EPS), 1.0 - TAU_EPS)
    return float(tau_to_theta(family, tau))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def simulate_dvine(spec: DvineSpec, T: int, seed: int):
    """Sample a T x d uniform panel from the spec by conditional inversion.

    Every time-varying edge gets an independent latent path; the function
    returns the panel together with the tau paths used for those edges.
    Deterministic given the seed.
    """
    spec.validate()
    d = spec.dim
    rng_u = np.random.default_rng(np.random.SeedSequence([int(seed), 0]))
    w = rng_u.uniform(size=(T, d))

    theta_paths: dict[tuple[int, int], np.ndarray | float | None] = {}
    tau_paths: dict[tuple[int, int], np.ndarray] = {}
    for tree in range(1, d):
        for pos in range(1, d - tree + 1):
            edge = spec.edges[(tree, pos)]
            if edge.mode is Mode.TIME_VARYING:
                rng_e = np.random.default_rng(np.random.SeedSequence([int(seed), 1, tree, pos]))
                lam = simulate_path(edge.scar, T, rng_e.standard_normal(T))
                theta_paths[(tree, pos)] = theta_from_latent(edge.family, lam)
                tau_paths[(tree, pos)] = np.tanh(lam)
            elif edge.mode is Mode.STATIC:
                theta_paths[(tree, pos)] = edge.theta
            else:
                theta_paths[(tree, pos)] = None

    x = np.empty((T, d))
    x[:, 0] = w[:, 0]
    cond = [x[:, 0]]  # cond[j-1] = F(x_{i-j} | x_{i-j+1..i-1}) for the current i
    for i in range(1, d):
        z = w[:, i]
        after = [None] * (i + 1)  # after[j] = F(x_i | x_{i-j+1..i-1})
        for j in range(i, 0, -1):
            edge = spec.edges[(j, i - j + 1)]
            if edge.mode is not Mode.INDEPENDENCE:
                z = h_inverse(edge.family, z, cond[j - 1], theta_paths[(j, i - j + 1)])
            after[j] = z
        x[:, i] = z
        if i < d - 1:
            new_cond = [x[:, i]]
            for j in range(1, i + 1):
                edge = spec.edges[(j, i - j + 1)]
                if edge.mode is Mode.INDEPENDENCE:
                    new_cond.append(cond[j - 1])
                else:
                    new_cond.append(
                        h_func(edge.family, cond[j - 1], after[j], theta_paths[(j, i - j + 1)])
                    )
            cond = new_cond

    from .panels import UniformPanel

    panel = UniformPanel(values=clamp_unit(x), labels=list(spec.ordering))
    return panel, tau_paths
