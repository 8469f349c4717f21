"""Time integration of the constrained lattice dynamics in flux form.

The explicit scheme advances the interior densities with the conservative
flux divergence, refreshes the Dirichlet ghost from the boundary law at the
current order parameter, and re-solves the nonlocal constraint after every
step, so every emitted state satisfies the conservation law to solver
tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels as K
from .equilibrium import (FamilyModel, discrete_equilibrium, log_mean,
                          constraint_residual, solve_theta)
from .errors import PositivityLoss, StepFailure

__all__ = [
    "ClusterState", "StepScheme", "RunSeries", "flux", "flux_forms",
    "cfl_dt", "step", "run",
]

SERIES_COLUMNS = ("t", "theta", "G", "F_rho", "D", "W_mass", "Wp_moment",
                  "edge_mass")


@dataclass(frozen=True)
class ClusterState:
    """Interior densities on sites 1..n with the coupled order parameter."""

    grid: object
    c: np.ndarray
    theta: float
    rho: float
    t: float = 0.0

    def __post_init__(self):
        if self.c.shape != (self.grid.n,):
            raise ValueError("c must cover the interior sites 1..n")

    def validate(self, model: FamilyModel, tol: float = 1e-10):
        if np.any(self.c < 0.0):
            raise ValueError("negative density")
        r = constraint_residual(model, self.c, self.theta)
        if abs(r) > tol:
            raise ValueError(f"constraint residual {r:.3e} exceeds {tol:g}")
        return self

    def full(self, model: FamilyModel) -> np.ndarray:
        """Densities including the ghost site at the current theta."""
        out = np.empty(self.grid.n + 1)
        out[0] = model.ghost_value(self.theta)
        out[1:] = self.c
        return out


@dataclass(frozen=True)
class StepScheme:
    """Stepper configuration: explicit Euler or semi-implicit diffusion."""

    kind: str = "explicit"
    dt_policy: str = "cfl"  # "cfl" | "fixed"
    dt: Optional[float] = None
    safety: float = 0.9

    def __post_init__(self):
        if self.kind not in ("explicit", "semi-implicit"):
            raise ValueError("kind must be 'explicit' or 'semi-implicit'")
        if self.dt_policy not in ("cfl", "fixed"):
            raise ValueError("dt_policy must be 'cfl' or 'fixed'")
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety factor must lie in (0, 1]")
        if self.dt_policy == "fixed" and (self.dt is None or self.dt <= 0):
            raise ValueError("fixed policy requires a positive dt")


def initial_state(model: FamilyModel, c: np.ndarray,
                  theta0: Optional[float] = None, t: float = 0.0) -> ClusterState:
    """Wrap densities into a state with theta solved from the constraint."""
    c = np.asarray(c, dtype=float).copy()
    theta = solve_theta(model, c, theta0=theta0)
    return ClusterState(grid=model.grid, c=c, theta=theta,
                        rho=model.conservation.rho, t=t)


def _edge_fluxes(model: FamilyModel, cfull: np.ndarray,
                 theta: float) -> np.ndarray:
    """True fluxes at edges 0..n (zero at the right truncation edge)."""
    n = model.grid.n
    fac = model.positivity_factors(theta)
    eJ = np.empty(n + 1)
    eJ[:n] = model.a[:n] * fac * cfull[:n] - model.a[1:] * cfull[1:]
    eJ[n] = 0.0
    return eJ / model.eps


def flux(model: FamilyModel, state: ClusterState, edge: int) -> float:
    """Net flux across the edge between sites ``edge`` and ``edge+1``."""
    if not 0 <= edge <= model.grid.n:
        raise ValueError("edge index out of range")
    return float(_edge_fluxes(model, state.full(model), state.theta)[edge])


def flux_forms(model: FamilyModel, state: ClusterState):
    """The three algebraically equivalent flux expressions at edges 0..n-1.

    Returns (direct, difference-form, log-mean form).  The difference form
    uses the detailed-balance factor k and the ratio to the steady profile;
    the log-mean form multiplies k by the logarithmic mean of neighbouring
    ratios and the discrete gradient of the log ratio.
    """
    n = model.grid.n
    eps = model.eps
    cfull = state.full(model)
    theta = state.theta
    direct = _edge_fluxes(model, cfull, theta)[:n]

    eq = discrete_equilibrium(model, theta).values
    k = model.a[1:] * eq[1:]  # detailed-balance factor at edges 0..n-1
    r = cfull / eq
    diff_form = -k * (r[1:] - r[:n]) / eps

    lm = log_mean(r[:n], r[1:])
    with np.errstate(divide="ignore"):
        logr = np.where(r > 0.0, np.log(np.where(r > 0.0, r, 1.0)), 0.0)
    grad = np.where((r[:n] > 0.0) & (r[1:] > 0.0),
                    (logr[1:] - logr[:n]) / eps, 0.0)
    # zero-density sides contribute zero through the log-mean limit
    lm_form = -k * lm * grad
    dead = (r[:n] <= 0.0) ^ (r[1:] <= 0.0)
    if np.any(dead):
        lm_form = np.where(dead, -k * (r[1:] - r[:n]) / eps, lm_form)
    return direct, diff_form, lm_form


def cfl_dt(model: FamilyModel, state: ClusterState,
           safety: float = 0.9) -> float:
    """Positivity-preserving explicit step bound."""
    drift = np.abs(state.theta * model.lam - model.gam)
    mx = float(np.max(model.a * (1.0 + model.eps * drift)))
    return safety * model.eps ** 2 / (2.0 * mx)


def _explicit_step(model: FamilyModel, state: ClusterState,
                   dt: float) -> ClusterState:
    cfull = state.full(model)
    eJ = _edge_fluxes(model, cfull, state.theta) * model.eps
    c_new = state.c + (dt / model.eps ** 2) * (eJ[:-1] - eJ[1:])
    if np.any(c_new < 0.0):
        site = int(np.argmax(c_new < 0.0)) + 1
        raise PositivityLoss(
            f"negative density at site {site} after explicit step "
            f"(dt={dt:g})", site=site, t=state.t)
    theta_new = solve_theta(model, c_new, theta0=state.theta)
    return replace(state, c=c_new, theta=theta_new, t=state.t + dt)


def _semi_implicit_step(model: FamilyModel, state: ClusterState,
                        dt: float) -> ClusterState:
    """Backward Euler on the pure second difference, explicit drift."""
    n = model.grid.n
    eps = model.eps
    theta = state.theta
    cfull = state.full(model)
    fac = model.positivity_factors(theta)
    # drift part of the flux (explicit): a*(fac-1)/eps * c at the left site
    drift_edge = np.zeros(n + 1)
    drift_edge[:n] = model.a[:n] * (fac - 1.0) / eps * cfull[:n]
    rhs = state.c + (dt / eps) * (drift_edge[:n] - drift_edge[1:n + 1])
    # ghost diffusion inflow is explicit (source at the first site)
    rhs[0] += (dt / eps ** 2) * model.a[0] * cfull[0]

    r = dt / eps ** 2
    a_int = model.a[1:]
    diag = np.empty(n)
    diag[:-1] = 1.0 + 2.0 * r * a_int[:-1]
    diag[-1] = 1.0 + r * a_int[-1]  # zero-flux right edge
    upper = -r * a_int[1:]
    lower = -r * a_int[:-1]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    c_new = solve_banded((1, 1), ab, rhs)
    if np.any(c_new < 0.0):
        site = int(np.argmax(c_new < 0.0)) + 1
        raise PositivityLoss(
            f"negative density at site {site} after semi-implicit step",
            site=site, t=state.t)
    theta_new = solve_theta(model, c_new, theta0=theta)
    return replace(state, c=c_new, theta=theta_new, t=state.t + dt)


def step(model: FamilyModel, state: ClusterState, dt: float,
         scheme: StepScheme = StepScheme()) -> ClusterState:
    """Advance one step; the returned state satisfies the constraint."""
    if scheme.kind == "explicit":
        return _explicit_step(model, state, dt)
    return _semi_implicit_step(model, state, dt)


@dataclass
class RunSeries:
    """Time-indexed thermodynamic records of one integration."""

    t: np.ndarray
    theta: np.ndarray
    G: np.ndarray
    F_rho: np.ndarray
    D: np.ndarray
    W_mass: np.ndarray
    Wp_moment: np.ndarray
    edge_mass: np.ndarray
    p_moment: float
    final_state: ClusterState
    states: Optional[List[ClusterState]] = None
    theta_column: str = "theta"

    def __len__(self):
        return len(self.t)

    def columns(self):
        return {
            "t": self.t, self.theta_column: self.theta, "G": self.G,
            "F_rho": self.F_rho, "D": self.D, "W_mass": self.W_mass,
            "Wp_moment": self.Wp_moment, "edge_mass": self.edge_mass,
        }

    def to_csv(self, path):
        cols = self.columns()
        names = list(cols)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            for i in range(len(self.t)):
                fh.write(",".join(f"{cols[k][i]:.17g}" for k in names) + "\n")

    @staticmethod
    def from_csv(path) -> dict:
        """Read a series CSV back as a dict of column arrays."""
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.size == 0:
            return {k: np.empty(0) for k in header}
        return {k: data[:, i] for i, k in enumerate(header)}


def _flux_kernel_args(model: FamilyModel):
    bp0, bp1 = model.boundary.params
    cons = model.conservation
    w = model.w if model.w is not None else np.zeros(model.grid.n + 1)
    lo, hi = model.theta_bracket
    return (model.eps, model.a, model.lam, model.gam, w,
            model.boundary.tag, bp0, bp1, cons.ctag, cons.rho, cons.z_s,
            lo, hi)


def run(model: FamilyModel, state0: ClusterState, T: float,
        cadence: int = 1, scheme: StepScheme = StepScheme(),
        p_moment: float = 1.0, keep_states: bool = False,
        record: Optional[Callable] = None) -> RunSeries:
    """Integrate to time ``T`` emitting a record every ``cadence`` steps.

    Records carry (t, theta, G, F_rho, D, W-mass, W^p moment, edge mass);
    ``record`` is an optional callback invoked with each recorded state.
    The Lyapunov energy in the G column is the family free energy relative
    to the model's own steady profile, so its decay reflects the discrete
    structure exactly.
    """
    from .analysis import dissipation, lyapunov_free_energy
    from .equilibrium import log_discrete_equilibrium as _logeq

    if T < 0.0:
        raise ValueError("T must be nonnegative")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")

    g_min = _lyapunov_floor(model)
    w_arr = model.w if model.w is not None else None
    n = model.grid.n
    edge_lo = int(math.floor(0.95 * n))

    rows = {k: [] for k in SERIES_COLUMNS}
    states: List[ClusterState] = []

    def emit(st: ClusterState):
        g = lyapunov_free_energy(model, st, _logeq(model, st.theta))
        d = dissipation(model, st)
        if w_arr is not None:
            wm = model.eps * float(w_arr[1:] @ st.c)
            wp = model.eps * float((w_arr[1:] ** p_moment) @ st.c)
            em = model.eps * float(w_arr[1 + edge_lo:] @ st.c[edge_lo:])
        else:
            wm = wp = em = math.nan
        rows["t"].append(st.t)
        rows["theta"].append(st.theta)
        rows["G"].append(g)
        rows["F_rho"].append(g - g_min)
        rows["D"].append(d)
        rows["W_mass"].append(wm)
        rows["Wp_moment"].append(wp)
        rows["edge_mass"].append(em)
        if keep_states:
            states.append(st)
        if record is not None:
            record(st)

    state = state0
    emit(state)
    if T > 0.0:
        use_explicit_kernel = (scheme.kind == "explicit")
        t_end = state0.t + T
        while state.t < t_end - 1e-14 * max(1.0, abs(t_end)):
            if use_explicit_kernel:
                state = _run_block_kernel(model, state, t_end, cadence,
                                          scheme)
            else:
                state = _run_block_python(model, state, t_end, cadence,
                                          scheme)
            emit(state)

    arrays = {k: np.asarray(v, dtype=float) for k, v in rows.items()}
    return RunSeries(final_state=state, p_moment=p_moment,
                     states=states if keep_states else None, **arrays)


def _dt_for(model, state, scheme):
    if scheme.dt_policy == "fixed":
        return scheme.dt
    return cfl_dt(model, state, scheme.safety)


def _steps_until(state_t, t_end, dt, cadence):
    """Number of steps to take now: at most cadence, never past t_end."""
    remaining = t_end - state_t
    k = min(cadence, max(1, int(math.ceil(remaining / dt - 1e-12))))
    return k


def _run_block_kernel(model: FamilyModel, state: ClusterState, t_end: float,
                      cadence: int, scheme: StepScheme) -> ClusterState:
    args = _flux_kernel_args(model)
    c = state.c.copy()
    use_cfl = scheme.dt_policy == "cfl"
    dt = scheme.dt if not use_cfl else cfl_dt(model, state, scheme.safety)
    nsteps = _steps_until(state.t, t_end, dt, cadence)
    # clamp the last step to land on t_end under a fixed policy
    if not use_cfl and state.t + nsteps * dt > t_end:
        nsteps = max(1, int(round((t_end - state.t) / dt)))
    (eps, a, lam, gam, w, btag, bp0, bp1, ctag, rho, zs, lo, hi) = args
    theta, t, status, site, done, dt_last = K.family_run_block(
        c, eps, a, lam, gam, w, btag, bp0, bp1, ctag, rho, zs,
        state.theta, state.t, nsteps, float(dt), use_cfl, scheme.safety,
        lo, hi, 1e-12)
    if status == 1:
        raise StepFailure(f"positivity loss at site {site}, t={t:g}",
                          t=t, cause=PositivityLoss("negative density",
                                                    site=site, t=t))
    if status != 0:
        raise StepFailure(f"constraint solve failed at t={t:g}", t=t)
    return replace(state, c=c, theta=theta, t=t)


def _run_block_python(model: FamilyModel, state: ClusterState, t_end: float,
                      cadence: int, scheme: StepScheme) -> ClusterState:
    for _ in range(cadence):
        if state.t >= t_end - 1e-14 * max(1.0, abs(t_end)):
            break
        dt = _dt_for(model, state, scheme)
        dt = min(dt, t_end - state.t)
        try:
            state = step(model, state, dt, scheme)
        except PositivityLoss as exc:
            raise StepFailure(f"{exc} at t={state.t:g}", t=state.t,
                              cause=exc) from exc
    return state


def _lyapunov_floor(model: FamilyModel) -> float:
    from .analysis import lyapunov_minimum
    return lyapunov_minimum(model)
