"""Set-membership identification of continuous-time MIMO LTI systems from
bounded-noise sampled data, via Tustin discretization and sparse polynomial
optimization."""

from .errors import (
    BoundEstimationError,
    CliqueAuditError,
    CtsmidError,
    DegenerateMapError,
    FitUndefinedError,
    IdentificationInfeasibleError,
    RelaxationFailureError,
)
from .lti import (
    ContinuousTf,
    DiscreteTf,
    MimoModel,
    ct_simulate,
    discretization_error,
    dt_simulate,
    tustin_c_coeff,
    tustin_map,
)
from .ident import PuiReport, compute_puis, feasibility_oracle, validate
from .nlp import (
    NlpSolution,
    auglag_minimize,
    estimate_delta_bound,
    fixed_theta_program,
    refine_theta_e,
)
from .pop import (
    ObjectiveSpec,
    PopProblem,
    PriorSpec,
    audit_cliques,
    build_cliques,
    build_pop,
)
from .relax import Relaxation, assemble, with_objective
from .sdp import ConicSolution, SdpProblem, load_sdpa, save_sdpa, solve
from .signals import (
    Dataset,
    DeltaBoundSpec,
    NoiseSpec,
    SignalSpec,
    delta_bounds,
    generate_signal,
    load_dataset,
    make_dataset,
    metrics,
    save_dataset,
)

__version__ = "0.1.0"
