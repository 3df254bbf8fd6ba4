"""Collective depolarisation of spin-j / symmetric N-qubit states in the multipole basis."""

__version__ = "0.1.0"

from .angular import HalfInt, clebsch_gordan, spherical_harmonic, spin_matrices
from .dynamics import (
    NumericalError, RateSet, WrongSolverError, dense_oracle_evolve, evolve, evolve_diagonal,
    evolve_general, gamma_table, purity_derivative, purity_ode_chain, purity_rate_pure,
    purity_time, qsl_bounds, superdecoherence_gap, trajectory,
)
from .entanglement import (
    CharTimes, embed_bipartite, n4_pt_eigenvalues, negativity, negativity_pure, t_npt, t_p, t_rmax,
)
from .extremal import (
    OptimizationResult, directional_derivative, hoap_search, minimize_purity, mu_star, mu_state,
)
from .harness import FitResult, ScanSpec, fit_scaling, run_scan
from .mpb import (
    MultipoleVector, PFunctionCoeffs, build_tlm, from_multipoles, p_function_coeffs,
    p_function_min, partial_trace_multipoles, purity, to_multipoles,
)
from .states import (
    DickeVector, UnsupportedError, anticoherence_measure, coherent, db, dicke, ghz, hoap,
    mms_distance, rmax_ball_radius, spin_expectations, w,
)
