"""Black-box acceleration for decentralized composite optimization."""

from .problems import (
    AgentLoss,
    CompositeProblem,
    HuberRegularizedLinreg,
    LinearRegressionLoss,
    LogisticLoss,
    ProblemConstants,
    ProxShiftedLoss,
    QuadraticLoss,
    Regularizer,
    estimate_constants,
)
from .network import (
    PudaMatrices,
    Topology,
    chebyshev_operator,
    chebyshev_rounds,
    erdos_renyi,
    extra_triple,
    fastmix,
    metropolis_weights,
    prox_ed_triple,
    spectral_gap,
)
from .inner_base import Counters, InnerAlgorithm
from .inner_sonata import Sonata, SonataState
from .inner_puda import Puda, PudaState, puda_delta_policy
from .inner_pmgt import PmgtLsvrg, PmgtState, pmgt_delta_policy
from .outer import (
    FixedBudget,
    MetricsConfig,
    OuterSchedule,
    PracticalBudget,
    PracticalCvxBudget,
    RunTrace,
    TheoryCvxBudget,
    TheoryScvxBudget,
    alpha_cvx_next,
    alpha_scvx,
    build_subproblem,
    extrapolate,
    run_dcatalyst,
    run_dcatalyst_from,
    run_plain,
)
from .oracle import (
    MoreauOracle,
    ReferenceSolution,
    certify_estseq,
    check_assumption4,
    check_assumption5,
    fista_solve,
    moreau_grad,
)

__version__ = "0.1.0"
