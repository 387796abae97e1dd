"""Band-operator families over subshift hulls on discrete groups.

The library realizes shift-equivariant families of finite-propagation
operators over compact symbolic hulls on Z^N and the discrete Heisenberg
group, and verifies at desk scale the structural facts that make them
useful: spectra, pseudospectra and resolvent norms agree across minimal or
pseudoergodically sampled hulls, and limit-operator spectra sit inside the
source operator's.
"""

__version__ = "0.1.0"

from .groups import (  # noqa: F401
    AngularCap,
    EscapeSequence,
    GroupElement,
    GroupError,
    GroupSpec,
    Window,
    ball,
    box,
    centered_interval,
    compose,
    direction_memberships,
    heisenberg,
    inverse,
    lattice,
    translate,
    word_length,
)
from .dynamics import (  # noqa: F401
    Alphabet,
    Configuration,
    Pattern,
    SubshiftSpec,
    Substitution,
    certify_minimal,
    certify_pseudoergodic,
    evaluate,
    fibonacci_hull,
    full_pm1_hull,
    halfplane_ab_hull,
    legal_patterns,
    metric_distance,
    period_q_hull,
    sample_limit_set,
    shift,
    thue_morse_hull,
)
from .operators import (  # noqa: F401
    CoefficientScheme,
    FiniteSection,
    LimitOperatorProbe,
    approximate_limit_operator,
    entry,
    feinberg_zee,
    fibonacci_jacobi,
    free_laplacian,
    heisenberg_adjacency,
    norm_upper_bound,
    operator_spectrum_sample,
    period_q_jacobi,
    section,
    verify_equivariance,
    window_seminorm,
)
from .spectra import (  # noqa: F401
    GridSpec,
    PseudospectrumGrid,
    SigmaMinSolver,
    SpectrumSample,
    constancy_report,
    eigenvalues,
    floquet_oracle,
    hausdorff_distance,
    inclusion_check,
    pseudospectrum_grid,
    smallest_singular_value,
)
