"""D-vine copula models whose pair dependence follows a latent Gaussian AR(1).

The package simulates and estimates high-dimensional time-varying dependence
models: every pair copula in a D-vine can switch between a time-varying
(latent autoregressive), a static, or an independence specification, fitted
sequentially tree by tree with simulated maximum likelihood via efficient
importance sampling and selected by BIC.
"""

from .copulas import (
    Family,
    SELECTABLE_FAMILIES,
    fisher,
    fisher_inv,
    h_func,
    h_inverse,
    log_pair_density,
    pair_cdf,
    pair_density,
    tau_to_theta,
    theta_from_latent,
    theta_to_tau,
)
from .edgefit import (
    CandidateScore,
    EdgeModel,
    Mode,
    bic,
    fit_scar_edge,
    fit_static_edge,
    independence_edge,
    select_edge_model,
)
from .eis import (
    AuxSchedule,
    EisConfig,
    FixedPointResult,
    TrajectorySet,
    backward_regression,
    chi_log,
    eis_fixed_point,
    log_mean_weight,
    make_base_noise,
    sampler_moments,
    simulated_loglik,
    smoothed_tau,
)
from .latent import (
    ScarParams,
    StationaryStats,
    from_unconstrained,
    simulate_path,
    stationary_stats,
    to_unconstrained,
)
from .panels import (
    RawPanel,
    UniformPanel,
    load_fit,
    load_panel,
    load_uniform_panel,
    rank_pit,
    save_fit,
    save_panel,
    save_tau_paths,
)
from .benchmark import McReport, Scenario, builtin_scenario, run_scenario, write_mc_report
from .vine import (
    DvineFit,
    DvineSpec,
    dvine_loglik,
    empirical_kendall_tau,
    fit_dvine,
    implied_tau_path,
    order_variables,
    pseudo_observations,
    simulate_dvine,
    smoothed_tau_paths,
)

__version__ = "0.1.0"
