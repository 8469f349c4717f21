"""Thermodynamic functionals and quantitative checks.

Free energies, dissipation, Pinsker-type bounds, the Muckenhoupt-style
log-Sobolev constant, weighted moments and decay-rate fits.  All
operations are pure; they consume a model plus a state (or a recorded
series) and return numbers or small report objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.stats import linregress

from .equilibrium import (FamilyModel, continuum_equilibrium,
                          discrete_equilibrium, equilibrium_theta, log_mean)
from .errors import (InsufficientData, InvalidTheta, NonPositiveEnergy)
from .potentials import CoefficientSpec, tail_integral

__all__ = [
    "EnergyRecord", "DecayFit", "LsiResult", "MomentReport",
    "free_energy", "lyapunov_free_energy", "lyapunov_minimum",
    "free_energy_norm", "relative_entropy", "grid_theta_eq", "dissipation",
    "pinsker_check", "lsi_constant", "lsi_model_preset", "omega_weight",
    "weighted_moment", "moment_bound_check", "fit_decay", "energy_record",
]


def _entropy_sum(c, ref):
    """sum c*(log(c/ref) - 1) with the x log x -> 0 limit at c = 0."""
    pos = c > 0.0
    out = -float(np.sum(c))
    out += float(np.sum(c[pos] * (np.log(c[pos]) - np.log(ref[pos]))))
    return out


def _entropy_sum_logref(c, logref):
    """Same with the reference supplied in log form (overflow-safe)."""
    pos = c > 0.0
    out = -float(np.sum(c))
    out += float(np.sum(c[pos] * (np.log(c[pos]) - logref[pos])))
    return out


def relative_entropy(model: FamilyModel, c: np.ndarray,
                     ref: np.ndarray) -> float:
    """eps * sum ref*Psi(c/ref), Psi(r) = r log r - r + 1 (interior sites)."""
    c = np.asarray(c, dtype=float)
    ref = np.asarray(ref, dtype=float)
    pos = c > 0.0
    out = float(np.sum(ref - c))
    out += float(np.sum(c[pos] * (np.log(c[pos]) - np.log(ref[pos]))))
    return model.eps * out


def lyapunov_free_energy(model: FamilyModel, state,
                         log_eq: Optional[np.ndarray] = None) -> float:
    """Family free energy: relative-entropy sum against the steady profile
    at the state's own order parameter, plus the conservation potential."""
    if log_eq is None:
        log_eq = log_discrete_equilibrium(model, state.theta)
    return (model.eps * _entropy_sum_logref(state.c, log_eq[1:])
            + model.conservation.h(state.theta))


def lyapunov_minimum(model: FamilyModel) -> float:
    """Value of the family free energy at the constrained steady state."""
    th = equilibrium_theta(model)
    eq = discrete_equilibrium(model, th)
    return (-model.eps * float(np.sum(eq.interior))
            + model.conservation.h(th))


def free_energy(model: FamilyModel, state) -> float:
    """Free energy of a state.

    Continuum-mode models use the entropy + potential + theta^2/2 form with
    the sampled potential; family-mode models use the equilibrium-referenced
    relative entropy plus the conservation potential.
    """
    if model.conservation.mode == "continuum":
        if model.v is None or model.w is None:
            raise ValueError("continuum free energy requires sampled V, W")
        c = state.c
        pot = model.v[1:] + np.log(model.a[1:])
        val = model.eps * (_entropy_sum(c, np.ones_like(c))
                           + float(pot @ c))
        return val + 0.5 * state.theta ** 2
    return lyapunov_free_energy(model, state)


def grid_theta_eq(model: FamilyModel) -> float:
    """Order parameter of the grid-level constrained minimizer.

    Root of theta + eps*sum(W c_theta^eq) = rho with the continuum steady
    profile sampled on the model's grid.
    """
    if model.spec is None or model.w is None:
        raise ValueError("requires a model built from a coefficient spec")
    spec = model.spec
    x_int = model.grid.x_interior
    w = model.w[1:]
    a_int = model.a[1:]
    v_int = model.v[1:]
    rho = model.conservation.rho

    def g(th):
        prof = np.exp(-v_int + th * w) / a_int
        return th + model.eps * float(w @ prof) - rho

    lo, hi = -50.0, 5.0
    if g(lo) > 0.0 or g(hi) < 0.0:
        lo, hi = -500.0, 50.0
    return float(brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=300))


def _continuum_reference(model: FamilyModel):
    th_eq = grid_theta_eq(model)
    prof = continuum_equilibrium(model.spec, th_eq, model.grid)
    return th_eq, prof.values


def free_energy_norm(model: FamilyModel, state) -> float:
    """Normalized free energy: distance above the constrained minimum."""
    if model.conservation.mode == "continuum":
        th_eq, ref = _continuum_reference(model)

        class _Ref:
            c = ref[1:]
            theta = th_eq
        return free_energy(model, state) - free_energy(model, _Ref)
    return lyapunov_free_energy(model, state) - lyapunov_minimum(model)


def dissipation(model: FamilyModel, state) -> float:
    """Discrete entropy production over the edges, ghost included.

    Sum of k * logmean * (discrete gradient of log density ratio)^2,
    evaluated in the equivalent flux * gradient form: the flux comes
    directly from the state and the log-ratio gradient from the log of the
    product formula, so no steady-profile exponentiation is needed.  The
    ghost matches the steady profile exactly, so its log ratio vanishes;
    empty-density edges contribute zero.
    """
    n = model.grid.n
    eps = model.eps
    fac = model.positivity_factors(state.theta)
    cfull = state.full(model)
    eJ = model.a[:n] * fac * cfull[:n] - model.a[1:] * cfull[1:]
    pos = cfull > 0.0
    with np.errstate(divide="ignore"):
        logac = np.where(pos, np.log(np.where(pos, cfull, 1.0))
                         + np.log(model.a), 0.0)
    # d log(c/c_eq) over edge i: log(a c)_{i+1} - log(a c)_i - log(fac_i)
    mask = pos[:n] & pos[1:]
    dlog = np.where(mask, logac[1:] - logac[:n] - np.log(fac), 0.0)
    terms = np.where(mask, -eJ * dlog, 0.0)
    return float(np.sum(terms)) / eps


def energy_record(model: FamilyModel, state) -> "EnergyRecord":
    """All thermodynamic functionals of a state at once."""
    th_eq, ref = _continuum_reference(model) \
        if model.conservation.mode == "continuum" and model.spec is not None \
        else (None, None)
    if th_eq is not None:
        h = relative_entropy(model, state.c, ref[1:])
        f_rho = h + 0.5 * (state.theta - th_eq) ** 2
    else:
        th_eq = equilibrium_theta(model)
        eq = discrete_equilibrium(model, th_eq)
        h = relative_entropy(model, state.c, eq.interior)
        f_rho = lyapunov_free_energy(model, state) - lyapunov_minimum(model)
    return EnergyRecord(G=free_energy(model, state), F_rho=f_rho, H=h,
                        D=dissipation(model, state), theta=state.theta,
                        theta_eq=th_eq, t=state.t)


@dataclass(frozen=True)
class EnergyRecord:
    G: float
    F_rho: float
    H: float
    D: float
    theta: float
    theta_eq: float
    t: float


# ---------------------------------------------------------------------------
# Pinsker bounds
# ---------------------------------------------------------------------------

def pinsker_check(spec: CoefficientSpec, model: FamilyModel, state,
                  theta_ref: float, mode: str = "full"):
    """Weighted L1 distance against the entropy bound.

    Full-line mode requires ``theta_ref < 0`` and uses the constant
    C_V = integral of exp(-V); truncated mode works for any theta_ref with
    the grid-limited constant.  Returns (lhs, rhs, satisfied).
    """
    if mode not in ("full", "truncated"):
        raise ValueError("mode must be 'full' or 'truncated'")
    if mode == "full" and theta_ref >= 0.0:
        raise InvalidTheta("full-line bound requires theta_ref < 0")
    eps = model.eps
    x = model.grid.x_interior
    w = np.asarray(spec.W(x), dtype=float)
    ref = np.exp(-np.asarray(spec.V(x), dtype=float) + theta_ref * w) \
        / np.asarray(spec.a(x), dtype=float)
    c = state.c
    lhs = eps * float(w @ np.abs(c - ref))
    h = relative_entropy(model, c, ref)
    if mode == "full":
        c_v, _ = tail_integral(lambda y: np.exp(-spec.V(y)))
        rhs = (2.0 / abs(theta_ref)) * max(h, math.sqrt(c_v * h))
    else:
        const = eps * float(np.sum(np.exp(-np.asarray(spec.V(x), float)
                                          + (theta_ref + 1.0) * w)))
        rhs = 2.0 * max(h, math.sqrt(const * h))
    return lhs, rhs, lhs <= rhs


# ---------------------------------------------------------------------------
# weighted log-Sobolev constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LsiResult:
    B: float
    Bx: np.ndarray
    x: np.ndarray
    diverging: bool


def lsi_constant(nu_density, mu_density, grid) -> LsiResult:
    """Muckenhoupt-type constant for the Dirichlet log-Sobolev inequality.

    B(x) = nu([x, inf)) * log(1 + e^2/nu([x, inf))) * int_0^x dy/mu(y) on
    the grid; B is its supremum.  The divergence flag is set when B(x) is
    still rising across the tail of the grid.
    """
    x = np.asarray(grid, dtype=float)
    nu = np.asarray(nu_density(x) if callable(nu_density) else nu_density,
                    dtype=float)
    mu = np.asarray(mu_density(x) if callable(mu_density) else mu_density,
                    dtype=float)
    if np.any(mu <= 0.0):
        raise ValueError("mu must be positive on the grid")
    dx = np.diff(x)
    # right-to-left tail of nu, trapezoid
    seg_nu = 0.5 * (nu[1:] + nu[:-1]) * dx
    tail = np.concatenate([np.cumsum(seg_nu[::-1])[::-1], [0.0]])
    seg_inv = 0.5 * (1.0 / mu[1:] + 1.0 / mu[:-1]) * dx
    inv_int = np.concatenate([[0.0], np.cumsum(seg_inv)])
    with np.errstate(divide="ignore"):
        logf = np.where(tail > 0.0,
                        np.log1p(np.where(tail > 0, math.e ** 2 / tail, 0.0)),
                        0.0)
    bx = tail * logf * inv_int
    b = float(np.max(bx))
    # rising tail detection over the last decade of the grid
    mask = x >= x[-1] / 10.0
    bx_tail = bx[mask]
    rising = bool(bx_tail[-1] >= 0.999 * np.max(bx)
                  and bx_tail[-1] > bx_tail[0])
    return LsiResult(B=b, Bx=bx, x=x, diverging=rising)


def omega_weight(spec: CoefficientSpec, x) -> np.ndarray:
    """Slow-decay weight W/(a W'^2)."""
    x = np.asarray(x, dtype=float)
    return spec.W(x) / (spec.a(x) * spec.dW(x) ** 2)


def lsi_model_preset(spec: CoefficientSpec, theta: float, grid):
    """Measure pair (nu, mu) for the model's own entropy-production bound.

    nu is the steady profile divided by the omega weight (normalized); mu
    is the steady profile over the same normalization.
    """
    x = np.asarray(grid, dtype=float)
    ceq = np.exp(-np.asarray(spec.V(x), float)
                 + theta * np.asarray(spec.W(x), float)) \
        / np.asarray(spec.a(x), float)
    om = omega_weight(spec, x)
    z = float(np.trapezoid(ceq / om, x))
    return ceq / om / z, ceq / z


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def weighted_moment(model: FamilyModel, state, p: float) -> float:
    """eps * sum W(x)^p c(x) over the interior sites."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    if model.w is None:
        raise ValueError("model carries no sampled weight")
    return model.eps * float((model.w[1:] ** p) @ state.c)


@dataclass(frozen=True)
class MomentReport:
    sup: float
    initial: float
    ratio: float
    growth_flag: bool
    caveat: str = ""


def moment_bound_check(series, p: Optional[float] = None) -> MomentReport:
    """Boundedness report for the recorded W^p moment.

    Flags unbounded growth when the moment increases monotonically across
    the last half of the run.  A caveat is attached when the edge mass grew
    substantially (truncation masks escape).
    """
    m = np.asarray(series.Wp_moment, dtype=float)
    if m.size == 0:
        raise InsufficientData("empty series")
    sup = float(np.max(m))
    initial = float(m[0])
    half = m[len(m) // 2:]
    growth = bool(len(half) >= 3 and np.all(np.diff(half) > 0.0)
                  and half[-1] > 1.001 * half[0])
    caveat = ""
    em = np.asarray(series.edge_mass, dtype=float)
    if em.size and np.isfinite(em).all() and em[-1] > 10.0 * max(em[0], 1e-300):
        caveat = ("edge mass grew during the run; the truncation wall "
                  "absorbs escaping mass, so boundedness here does not "
                  "reflect the open-domain behaviour")
    return MomentReport(sup=sup, initial=initial,
                        ratio=sup / (initial + 1.0), growth_flag=growth,
                        caveat=caveat)


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    form: str
    C: float
    lam: float
    k: Optional[float]
    r_squared: float
    window: tuple
    lam_ci: tuple

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "exponential":
            return self.C * np.exp(-self.lam * t)
        return (self.C + self.lam * t) ** (-self.k)


def _fit_window(t, f, drop_frac=0.2, floor=1e-13):
    n = len(t)
    start = int(math.floor(drop_frac * n))
    t_w = np.asarray(t[start:], dtype=float)
    f_w = np.asarray(f[start:], dtype=float)
    if np.any(f_w < -1e-12):
        raise NonPositiveEnergy(
            f"normalized free energy reaches {np.min(f_w):.3e} in the window")
    keep = f_w >= floor
    return t_w[keep], f_w[keep]


def fit_decay(series, form: str = "exponential", drop_frac: float = 0.2,
              floor: float = 1e-13) -> DecayFit:
    """Fit the recorded normalized free energy with a decay form.

    'exponential' fits C*exp(-lam*t) by least squares on the log; the
    'algebraic' form (C + lam*t)^(-k) is fit in log space by damped
    nonlinear least squares with k constrained positive.  The first 20% of
    records and values below the resolution floor are excluded.
    """
    t = np.asarray(series.t, dtype=float)
    f = np.asarray(series.F_rho, dtype=float)
    t_w, f_w = _fit_window(t, f, drop_frac, floor)
    if len(t_w) < 20:
        raise InsufficientData(
            f"only {len(t_w)} usable records in the fit window")
    logf = np.log(f_w)
    window = (float(t_w[0]), float(t_w[-1]))

    if form == "exponential":
        res = linregress(t_w, logf)
        lam = -res.slope
        r2 = float(res.rvalue ** 2)
        ci = (lam - 1.96 * res.stderr, lam + 1.96 * res.stderr)
        return DecayFit(form="exponential", C=float(np.exp(res.intercept)),
                        lam=float(lam), k=None, r_squared=r2, window=window,
                        lam_ci=(float(ci[0]), float(ci[1])))
    if form != "algebraic":
        raise ValueError("form must be 'exponential' or 'algebraic'")

    def resid(p):
        logc, loglam, logk = np.clip(p, -600.0, 600.0)
        return (logf + np.exp(logk)
                * np.log(np.exp(logc) + np.exp(loglam) * t_w))

    # slope-based start plus the exponential-limit start (large k); the
    # algebraic family nests the exponential, so the limit start guards
    # against data that is not decelerating
    starts = []
    k0 = max(-np.polyfit(np.log1p(t_w - t_w[0] + 1e-9), logf, 1)[0], 0.5)
    lam0 = max((np.exp(-logf[-1] / k0) - np.exp(-logf[0] / k0))
               / max(t_w[-1] - t_w[0], 1e-9), 1e-3)
    c0 = max(np.exp(-logf[0] / k0) - lam0 * t_w[0], 1e-3)
    starts.append([math.log(c0), math.log(lam0), math.log(k0)])
    slope, intercept = np.polyfit(t_w, logf, 1)
    k_big = 256.0
    starts.append([math.log(max(np.exp(-intercept / k_big), 1e-12)),
                   math.log(max(-slope, 1e-6))
                   - math.log(k_big) - intercept / k_big,
                   math.log(k_big)])
    sol = None
    for x0 in starts:
        cand = least_squares(resid, x0=x0, method="lm", max_nfev=20000)
        if sol is None or cand.cost < sol.cost:
            sol = cand
    logc, loglam, logk = np.clip(sol.x, -600.0, 600.0)
    r = sol.fun
    ss_res = float(r @ r)
    ss_tot = float(np.sum((logf - logf.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    lam = float(np.exp(loglam))
    # delta-method interval for lam from the LM jacobian
    try:
        jtj = sol.jac.T @ sol.jac
        cov = np.linalg.inv(jtj) * (ss_res / max(len(r) - 3, 1))
        sd = lam * math.sqrt(max(cov[1, 1], 0.0))
    except np.linalg.LinAlgError:
        sd = math.inf
    return DecayFit(form="algebraic", C=float(np.exp(logc)), lam=lam,
                    k=float(np.exp(logk)), r_squared=float(r2),
                    window=window, lam_ci=(lam - 1.96 * sd, lam + 1.96 * sd))
