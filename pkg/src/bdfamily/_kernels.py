"""Backend-dispatched kernel namespace."""
from ._backend import USE_NUMBA

if USE_NUMBA:
    from ._kernels_numba import (  # noqa: F401
        BOUNDARY_EXPONENTIAL, BOUNDARY_MONOMER,
        CONS_CONTINUUM, CONS_FAMILY_MASS, CONS_FAMILY_MONOMER,
        kahan_cumsum, solve_theta_family, family_run_block,
        bd_cfl_dt, bd_run_block,
    )
else:
    from ._kernels_numpy import (  # noqa: F401
        BOUNDARY_EXPONENTIAL, BOUNDARY_MONOMER,
        CONS_CONTINUUM, CONS_FAMILY_MASS, CONS_FAMILY_MONOMER,
        kahan_cumsum, solve_theta_family, family_run_block,
        bd_cfl_dt, bd_run_block,
    )
