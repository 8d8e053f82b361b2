"""cascade-sub: N-atom degenerate-cascade subradiance toolkit.

Integrates the dissipative cascade dynamics to stationarity, constructs
closed-form dark states, and quantifies their entanglement (PPT negativity)
and nonGaussianity, cross-validating every closed form against brute-force
numerics.
"""

__version__ = "0.1.0"

from .fock import (  # noqa: F401
    DensityMatrix,
    FockBasis,
    build_basis,
    collective_lowering,
    mode_annihilator,
    number_operator,
    partial_trace,
    partial_transpose,
    transition_operator,
)
from .dynamics import (  # noqa: F401
    CascadeParams,
    Liouvillian,
    Trajectory,
    build_effective_liouvillian,
    build_hamiltonian,
    build_liouvillian,
    evolve,
    measure,
    steady_state,
)
from .subradiance import (  # noqa: F401
    QubitPair,
    SubradiantState,
    analytic_p1_n2,
    dark_space,
    delta_p,
    epsilon_pair,
    hyp2f1_terminating,
    kinetic_energy,
    p_from_epsilon,
    qubit_pair,
    subradiant_state,
    subradiant_state_n2,
    subradiant_state_n3,
)
from .entanglement import (  # noqa: F401
    CovarianceMatrix,
    NegativityReport,
    ThermalReference,
    analytic_negativity_n2,
    covariance_matrix,
    cv_ppt_test,
    nong_measure,
    nong_stationary,
    nong_subradiant_closed_form,
    ppt_report,
    reference_gaussian,
    steady_state_density,
)
