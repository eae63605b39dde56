"""Co-simulate a jump-diffusion and a random field on shared noise and check the
generalized Ito-Wentzell formula path by path."""

from .catalog import CATALOG, catalog
from .errors import (
    ContractViolationError,
    DivergenceError,
    IntegrabilityError,
    InvalidDimensionError,
    ItoWentzellError,
    RepresentationWarning,
    ScenarioError,
)
from .field import FieldRealization, eval_field, eval_gradient, eval_hessian
from .noise import (
    IntensitySpec,
    MarkedJumpStream,
    TimeGrid,
    WienerPath,
    integrate_mark,
    refine,
    sample_jumps,
    sample_wiener,
)
from .scenario import (
    CENTERED,
    NONCENTERED,
    FieldCoefficients,
    ProcessCoefficients,
    ScenarioSpec,
    to_centered,
    to_noncentered,
    validate_derivatives,
)
from .sde import ProcessPath, integrate_process
from .wentzell import (
    ConvergenceTable,
    ResidualReport,
    convergence_study,
    rhs_jump,
    rhs_step,
    verify_many,
    verify_noise,
    verify_path,
)

__version__ = "0.1.0"
