"""Lattice models, equilibrium profiles and the nonlocal constraint solve.

A :class:`FamilyModel` is one member of the discrete family: a grid of
spacing ``eps`` with sampled coefficient arrays, a boundary law fixing the
ghost-site density as a function of the order parameter, and a conservation
law tying the weighted mass to the order parameter.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import BracketFailure, NonMonotoneWarning, PositivityViolation
from .potentials import CoefficientSpec

__all__ = [
    "Grid", "ExponentialLaw", "MonomerLaw", "ConservationLaw", "FamilyModel",
    "EquilibriumProfile", "continuum_model", "continuum_equilibrium",
    "discrete_equilibrium", "log_discrete_equilibrium", "W_eps",
    "solve_theta", "equilibrium_theta", "log_mean",
]


@dataclass(frozen=True)
class Grid:
    """Uniform lattice eps*{0,...,n}; site 0 is the boundary ghost."""

    eps: float
    n: int

    def __post_init__(self):
        if self.eps <= 0.0 or self.n < 2:
            raise ValueError("grid requires eps > 0 and n >= 2")

    @property
    def x(self) -> np.ndarray:
        return self.eps * np.arange(self.n + 1, dtype=float)

    @property
    def x_interior(self) -> np.ndarray:
        return self.eps * np.arange(1, self.n + 1, dtype=float)

    @property
    def x_max(self) -> float:
        return self.eps * self.n


@dataclass(frozen=True)
class ExponentialLaw:
    """Ghost density exp(-V(0) + theta*W(0)) / a(0)."""

    a0: float
    V0: float
    W0: float
    tag: int = K.BOUNDARY_EXPONENTIAL

    def c0(self, theta: float) -> float:
        return math.exp(-self.V0 + theta * self.W0) / self.a0

    def log_c0(self, theta: float) -> float:
        return -self.V0 + theta * self.W0 - math.log(self.a0)

    def dlog_c0(self, theta: float) -> float:
        return self.W0

    def d2log_c0(self, theta: float) -> float:
        return 0.0

    @property
    def params(self):
        return (-self.V0 - math.log(self.a0), self.W0)


@dataclass(frozen=True)
class MonomerLaw:
    """Ghost density z_s + theta (monomer excess closure)."""

    z_s: float
    tag: int = K.BOUNDARY_MONOMER

    def c0(self, theta: float) -> float:
        return self.z_s + theta

    def log_c0(self, theta: float) -> float:
        return math.log(self.z_s + theta)

    def dlog_c0(self, theta: float) -> float:
        return 1.0 / (self.z_s + theta)

    def d2log_c0(self, theta: float) -> float:
        return -1.0 / (self.z_s + theta) ** 2

    @property
    def params(self):
        return (self.z_s, 0.0)


@dataclass(frozen=True)
class ConservationLaw:
    """Weighted-mass constraint.

    ``mode`` selects the solve: ``continuum`` uses the sampled weight W in
    closed form (theta = rho - eps*sum(W c)); ``family`` solves the nonlocal
    root problem with the theta-derivative weight.  ``kind`` selects the
    right-hand side: ``mass`` gives H'(theta) = rho - theta, ``monomer``
    gives H'(theta) = rho/(z_s + theta) - 1.
    """

    mode: str
    rho: float
    kind: str = "mass"
    z_s: float = 0.0

    def __post_init__(self):
        if self.mode not in ("continuum", "family"):
            raise ValueError("mode must be 'continuum' or 'family'")
        if self.kind not in ("mass", "monomer"):
            raise ValueError("kind must be 'mass' or 'monomer'")

    @property
    def ctag(self) -> int:
        if self.mode == "continuum":
            return K.CONS_CONTINUUM
        return K.CONS_FAMILY_MASS if self.kind == "mass" \
            else K.CONS_FAMILY_MONOMER

    def h(self, theta):
        if self.kind == "mass":
            return self.rho * theta - 0.5 * theta * theta
        return self.rho * math.log(self.z_s + theta) - theta

    def h_prime(self, theta):
        if self.kind == "mass":
            return self.rho - theta
        return self.rho / (self.z_s + theta) - 1.0


@dataclass(frozen=True)
class FamilyModel:
    """One member of the discrete family on a uniform half-line lattice.

    ``a``, ``lam`` and ``gam`` are sampled at sites 0..n; ``w`` and ``v``
    carry the sampled weight and potential when the model was built from a
    coefficient spec (needed for the continuum-mode constraint and the
    thermodynamic functionals).
    """

    grid: Grid
    a: np.ndarray
    lam: np.ndarray
    gam: np.ndarray
    boundary: object
    conservation: ConservationLaw
    w: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    spec: Optional[CoefficientSpec] = field(default=None, compare=False,
                                            repr=False)
    label: str = ""
    theta_bracket: tuple = (-50.0, 5.0)

    def __post_init__(self):
        n1 = self.grid.n + 1
        for name in ("a", "lam", "gam"):
            arr = getattr(self, name)
            if arr.shape != (n1,):
                raise ValueError(f"{name} must have length n+1={n1}")
        if np.any(self.a <= 0.0):
            raise ValueError("a must be positive at all sites")
        if self.conservation.mode == "continuum" and self.w is None:
            raise ValueError("continuum conservation requires sampled w")

    @property
    def eps(self) -> float:
        return self.grid.eps

    def with_rho(self, rho: float) -> "FamilyModel":
        return replace(self, conservation=replace(self.conservation, rho=rho))

    def ghost_value(self, theta: float) -> float:
        return self.boundary.c0(theta)

    def positivity_factors(self, theta: float) -> np.ndarray:
        """1 + eps*(theta*lam - gam) at sites 0..n-1 (edge factors)."""
        n = self.grid.n
        return 1.0 + self.eps * (theta * self.lam[:n] - self.gam[:n])


@dataclass(frozen=True)
class EquilibriumProfile:
    """Sampled equilibrium profile on sites 0..n with its order parameter."""

    grid: Grid
    values: np.ndarray
    theta: float
    kind: str  # "continuum" | "discrete-family"

    def __post_init__(self):
        if self.values.shape != (self.grid.n + 1,):
            raise ValueError("values must cover sites 0..n")

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:]

    def to_csv(self, path, reference: Optional[np.ndarray] = None):
        """Write columns x, c, c_eq with a theta header comment."""
        ref = self.values if reference is None else reference
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# theta = {self.theta!r}\n")
            fh.write("x,c,c_eq\n")
            for xi, ci, ri in zip(self.grid.x, self.values, ref):
                fh.write(f"{xi:.17g},{ci:.17g},{ri:.17g}\n")


def continuum_model(spec: CoefficientSpec, eps: float, n: int, rho: float,
                    *, boundary: str = "exponential",
                    weight_mode: str = "continuum",
                    z_s: float = 1.0, label: str = "") -> FamilyModel:
    """Sample a coefficient spec onto a lattice.

    Uses the continuum-limit interpolation Lambda = W', Gamma = V' and the
    mass conservation kind H'(theta) = rho - theta.  ``weight_mode`` picks
    the constraint solve ('continuum' closed form or 'family' root solve).
    """
    grid = Grid(eps, n)
    x = grid.x
    a = np.asarray(spec.a(x), dtype=float)
    lam = np.asarray(spec.dW(x), dtype=float)
    gam = np.asarray(spec.dV(x), dtype=float)
    w = np.asarray(spec.W(x), dtype=float)
    v = np.asarray(spec.V(x), dtype=float)
    if boundary == "exponential":
        law = ExponentialLaw(a0=float(a[0]), V0=float(v[0]), W0=float(w[0]))
    elif boundary == "monomer":
        law = MonomerLaw(z_s=z_s)
    else:
        raise ValueError(f"unknown boundary law {boundary!r}")
    cons = ConservationLaw(mode=weight_mode, rho=rho, kind="mass")
    return FamilyModel(grid=grid, a=a, lam=lam, gam=gam, boundary=law,
                       conservation=cons, w=w, v=v, spec=spec,
                       label=label or spec.label)


def continuum_equilibrium(spec: CoefficientSpec, theta: float,
                          grid: Grid) -> EquilibriumProfile:
    """Continuum steady profile a^-1 exp(-V + theta W) sampled on the grid."""
    if theta > 0.0:
        warnings.warn("theta > 0: profile grows at infinity; valid only on "
                      "a truncated grid", stacklevel=2)
    x = grid.x
    vals = np.exp(-np.asarray(spec.V(x), dtype=float)
                  + theta * np.asarray(spec.W(x), dtype=float))
    vals /= np.asarray(spec.a(x), dtype=float)
    return EquilibriumProfile(grid=grid, values=vals, theta=theta,
                              kind="continuum")


def _log_factors(model: FamilyModel, theta: float) -> np.ndarray:
    fac = model.positivity_factors(theta)
    bad = fac <= 0.0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PositivityViolation(
            f"positivity condition fails at site {i} (x={i * model.eps:g}): "
            f"1 + eps*(theta*Lambda - Gamma) = {fac[i]:.3g}",
            site=i, x=i * model.eps)
    return np.log(fac)


def log_discrete_equilibrium(model: FamilyModel, theta: float,
                             c0: Optional[float] = None) -> np.ndarray:
    """Log of the detailed-balance steady profile at sites 0..n.

    Running product of the edge factors, accumulated in log space with
    compensated summation; immune to overflow for any admissible theta.
    """
    n = model.grid.n
    logfac = _log_factors(model, theta)
    if c0 is None:
        logc0 = model.boundary.log_c0(theta)
    else:
        if c0 <= 0.0:
            raise PositivityViolation(f"boundary value {c0:g} not positive",
                                      site=0, x=0.0)
        logc0 = math.log(c0)
    loga = np.log(model.a)
    logc = np.empty(n + 1)
    logc[0] = logc0
    logc[1:] = logc0 + loga[0] - loga[1:] + K.kahan_cumsum(logfac)
    return logc


def discrete_equilibrium(model: FamilyModel, theta: float,
                         c0: Optional[float] = None) -> EquilibriumProfile:
    """Detailed-balance steady profile of the lattice model."""
    logc = log_discrete_equilibrium(model, theta, c0)
    return EquilibriumProfile(grid=model.grid, values=np.exp(logc),
                              theta=theta, kind="discrete-family")


def W_eps(model: FamilyModel, theta: float) -> np.ndarray:
    """Theta-derivative of the log equilibrium profile, at sites 0..n.

    Boundary term from the boundary law plus the cumulative sum of
    Lambda/(1 + eps*(theta*Lambda - Gamma)) along the lattice.
    """
    n = model.grid.n
    fac = model.positivity_factors(theta)
    bad = fac <= 0.0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PositivityViolation(
            f"positivity condition fails at site {i}", site=i,
            x=i * model.eps)
    out = np.empty(n + 1)
    out[0] = model.boundary.dlog_c0(theta)
    out[1:] = out[0] + model.eps * K.kahan_cumsum(model.lam[:n] / fac)
    return out


def constraint_residual(model: FamilyModel, c: np.ndarray,
                        theta: float) -> float:
    """Residual of the conservation law for interior densities ``c``."""
    cons = model.conservation
    if cons.mode == "continuum":
        return theta + model.eps * float(model.w[1:] @ c) - cons.rho
    weps = W_eps(model, theta)[1:]
    return model.eps * float(weps @ c) - cons.h_prime(theta)


def solve_theta(model: FamilyModel, c: np.ndarray, *,
                theta0: Optional[float] = None, tol: float = 1e-12) -> float:
    """Order parameter consistent with the conservation law.

    Continuum mode is a closed form; family mode runs a safeguarded Newton
    iteration with bisection fallback on the configured bracket.  Warns with
    :class:`NonMonotoneWarning` when the residual map changes direction on
    the bracket.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (model.grid.n,):
        raise ValueError("c must cover the interior sites 1..n")
    if np.any(c < 0.0):
        raise ValueError("densities must be nonnegative")
    cons = model.conservation
    if cons.mode == "continuum":
        return cons.rho - model.eps * float(model.w[1:] @ c)

    lo, hi = model.theta_bracket
    th0 = theta0 if theta0 is not None else 0.5 * (lo + hi)
    bp0, bp1 = model.boundary.params
    theta, ok = K.solve_theta_family(
        c, model.eps, model.lam, model.gam, model.boundary.tag, bp0, bp1,
        cons.ctag, cons.rho, cons.z_s, th0, lo, hi, tol)
    if not ok:
        _warn_if_nonmonotone(model, c)
        raise BracketFailure(
            f"constraint solve failed on bracket [{lo:g}, {hi:g}]")
    _warn_if_nonmonotone(model, c, quick=True)
    return theta


def _warn_if_nonmonotone(model: FamilyModel, c: np.ndarray,
                         quick: bool = False):
    """Sample the residual map and warn when it is not monotone."""
    if quick:
        return
    lo, hi = model.theta_bracket
    ths = np.linspace(lo, hi, 33)
    vals = []
    for th in ths:
        try:
            vals.append(constraint_residual(model, c, th))
        except PositivityViolation:
            vals.append(np.nan)
    vals = np.asarray(vals)
    good = np.isfinite(vals)
    if good.sum() < 3:
        return
    dv = np.diff(vals[good])
    if np.any(dv > 0) and np.any(dv < 0):
        warnings.warn("constraint residual map is non-monotone on the "
                      "bracket", NonMonotoneWarning, stacklevel=3)


def equilibrium_theta(model: FamilyModel, *, tol: float = 1e-13) -> float:
    """Order parameter of the model's constrained steady state.

    Root of the scalar map obtained by inserting the detailed-balance
    profile into the model's own conservation law.
    """
    lo, hi = model.theta_bracket
    # shrink the bracket to the positivity region
    n = model.grid.n
    lam_e = model.lam[:n]
    gam_e = model.gam[:n]
    with np.errstate(divide="ignore"):
        pos = lam_e > 0
        neg = lam_e < 0
        if np.any(pos):
            lo = max(lo, float(np.max((gam_e[pos] - 1.0 / model.eps)
                                      / lam_e[pos])))
        if np.any(neg):
            hi = min(hi, float(np.min((gam_e[neg] - 1.0 / model.eps)
                                      / lam_e[neg])))
    if isinstance(model.boundary, MonomerLaw):
        lo = max(lo, -model.boundary.z_s)
    pad = 1e-9 * (1.0 + abs(lo) + abs(hi))
    lo += pad
    hi -= pad

    def phi(th):
        # residual of the constraint at the steady profile; capacity
        # overflow at large theta counts as a positive residual
        with np.errstate(over="ignore"):
            prof = np.exp(log_discrete_equilibrium(model, th)[1:])
            if not np.all(np.isfinite(prof)):
                return math.inf
            r = constraint_residual(model, prof, th)
        return r if math.isfinite(r) else math.inf

    f_lo, f_hi = phi(lo), phi(hi)
    if not np.isfinite(f_lo) or not np.isfinite(f_hi) or f_lo * f_hi > 0.0:
        # expand search: scan for a sign change
        ths = np.linspace(lo, hi, 257)
        vals = np.array([phi(t) for t in ths])
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
        if idx.size == 0:
            raise BracketFailure("no equilibrium on the theta bracket")
        lo, hi = float(ths[idx[0]]), float(ths[idx[0] + 1])
        f_lo = vals[idx[0]]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = phi(mid)
        if abs(fm) <= tol or hi - lo < 4e-16 * (1.0 + abs(mid)):
            return mid
        if f_lo * fm <= 0.0:
            hi = mid
        else:
            lo, f_lo = mid, fm
    return 0.5 * (lo + hi)


def log_mean(a, b):
    """Logarithmic mean; log_mean(a, 0) = 0 and log_mean(a, a) = a.

    Uses an atanh series for nearly equal arguments to avoid cancellation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(np.broadcast(a, b).shape)
    a, b = np.broadcast_arrays(a, b)
    both = (a > 0.0) & (b > 0.0)
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(both, (a - b) / np.where(s == 0.0, 1.0, s), 0.0)
    near = both & (np.abs(u) < 1e-4)
    far = both & ~near
    # u/atanh(u) = 1/(1 + u^2/3 + u^4/5 + u^6/7 + ...)
    u2 = u * u
    out[near] = (0.5 * s[near]
                 / (1.0 + u2[near] / 3.0 + u2[near] ** 2 / 5.0
                    + u2[near] ** 3 / 7.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = (a - b) / (np.log(np.where(a > 0, a, 1.0))
                        - np.log(np.where(b > 0, b, 1.0)))
    out[far] = lm[far]
    return out if out.ndim else float(out)
