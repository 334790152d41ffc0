"""Mountain-pass critical points by bisection on basins of attraction of the steepest-descent flow."""

from ._accel import BACKEND
from .basin import ComponentAtlas, OmegaVerdict, Outcome, boundary_value_check, classify_omega
from .bench import BenchmarkSpec, bvp_action, by_name, double_well, tilted_hat
from .core import (
    Functional,
    PathCurve,
    StepControl,
    Tolerances,
    audit_gradient,
    closed_form,
    constant,
    path_juxtapose,
    path_reverse,
    polyline,
    segment,
)
from .errors import *  # noqa: F401,F403
from .flow import (
    FlowSample,
    FlowTrajectory,
    StopCondition,
    StopReason,
    extract_ps_sample,
    integrate_flow,
    lemma1_bound_check,
)
from .loopmp import (
    HomotopyOracle,
    StrictMinContext,
    descending_loop,
    descending_path,
    is_eta_contractible,
    run_alg2,
    run_thm_mp2,
    winding_number,
    winding_oracle,
)
from .mpbisect import (
    BisectState,
    MpCandidate,
    RunReport,
    Termination,
    bisect_step,
    ps_from_below,
    run_alg1b,
    run_alg1c,
)

__version__ = "0.1.0"
