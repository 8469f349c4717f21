"""Structure-preserving solver for Becker-Doring cluster kinetics and the
interpolating family of discrete Fokker-Planck coarsening models."""

from ._backend import USE_NUMBA, backend_name
from .errors import (BDFamilyError, BracketFailure, DivergentIntegral,
                     DivergentSum, EvaluationFailure, InsufficientData,
                     InvalidTheta, InversionFailure, MassDrift,
                     NonMonotoneWarning, NonPositiveEnergy, PositivityLoss,
                     PositivityViolation, StepFailure)
from .potentials import (AdmissibilityReport, CoefficientSpec, CriticalData,
                         check_admissibility, coarsening_spec, custom_spec,
                         power_law, rho_s, spec_from_dict, spec_to_dict,
                         tabulated_spec, tail_integral, theta_eq,
                         transform_unit_diffusion, verify_assumptions)
from .equilibrium import (ConservationLaw, EquilibriumProfile,
                          ExponentialLaw, FamilyModel, Grid, MonomerLaw,
                          W_eps, constraint_residual, continuum_equilibrium,
                          continuum_model, discrete_equilibrium,
                          equilibrium_theta, log_discrete_equilibrium,
                          log_mean, solve_theta)
from .dynamics import (ClusterState, RunSeries, StepScheme, cfl_dt, flux,
                       flux_forms, initial_state, run, step)
from .becker_doring import (BDRates, BDState, bd_Q, bd_cfl_dt,
                            bd_dissipation, bd_equilibrium,
                            bd_equilibrium_z, bd_free_energy, bd_log_Q,
                            bd_rho_s, bd_run, bd_step, map_to_family)
from .analysis import (DecayFit, EnergyRecord, LsiResult, MomentReport,
                       dissipation, energy_record, fit_decay, free_energy,
                       free_energy_norm, grid_theta_eq, lsi_constant,
                       lsi_model_preset, lyapunov_free_energy,
                       lyapunov_minimum, moment_bound_check, omega_weight,
                       pinsker_check, relative_entropy, weighted_moment)

__version__ = "0.1.0"
