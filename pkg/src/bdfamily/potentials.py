"""Coefficient triples (a, V, W): validation, critical mass, unit-diffusion map.

A :class:`CoefficientSpec` bundles the diffusivity ``a``, the surface
potential ``V`` and the bulk weight ``W`` together with their first and
second derivatives.  The module computes the critical mass ``rho_s``, the
equilibrium order parameter ``theta_eq(rho)`` and the change of variables
that renormalizes the diffusivity to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (BracketFailure, DivergentIntegral, EvaluationFailure,
                     InversionFailure)

__all__ = [
    "CoefficientSpec", "CheckResult", "AdmissibilityReport", "CriticalData",
    "power_law", "coarsening_spec", "tabulated_spec", "custom_spec",
    "check_admissibility", "verify_assumptions", "tail_integral",
    "rho_s", "theta_eq", "transform_unit_diffusion",
    "spec_to_dict", "spec_from_dict",
]

_GL48 = np.polynomial.legendre.leggauss(48)
_GL24 = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class CoefficientSpec:
    """Evaluators for (a, V, W) and their first two derivatives on [0, inf).

    All evaluators are vectorized over numpy arrays.  ``kappa``, ``alpha``
    and ``gamma`` are the power-law exponents of W, a and V when the family
    is ``power-law``; they are ``None`` otherwise.
    """

    family: str
    a: Callable
    da: Callable
    d2a: Callable
    V: Callable
    dV: Callable
    d2V: Callable
    W: Callable
    dW: Callable
    d2W: Callable
    kappa: Optional[float] = None
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    unit_diffusion: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def evaluate(self, x):
        """Return dict of all nine evaluators at ``x``."""
        x = np.asarray(x, dtype=float)
        return {
            "a": self.a(x), "da": self.da(x), "d2a": self.d2a(x),
            "V": self.V(x), "dV": self.dV(x), "d2V": self.d2V(x),
            "W": self.W(x), "dW": self.dW(x), "d2W": self.d2W(x),
        }


def _pow(base_shift: float, p: float):
    def f(x):
        return (base_shift + np.asarray(x, dtype=float)) ** p
    return f


def _pow_family(p: float):
    """(1+x)^p with derivatives; handles p == 0 and p == 1 exactly."""
    def f0(x):
        return (1.0 + np.asarray(x, dtype=float)) ** p

    def f1(x):
        x = np.asarray(x, dtype=float)
        if p == 0.0:
            return np.zeros_like(x)
        return p * (1.0 + x) ** (p - 1.0)

    def f2(x):
        x = np.asarray(x, dtype=float)
        if p in (0.0, 1.0):
            return np.zeros_like(x)
        return p * (p - 1.0) * (1.0 + x) ** (p - 2.0)

    return f0, f1, f2


def power_law(kappa: float, alpha: float, gamma: float,
              label: str = "") -> CoefficientSpec:
    """Power-law triple W=(1+x)^kappa, a=(1+x)^alpha, V=(1+x)^gamma."""
    W, dW, d2W = _pow_family(kappa)
    a, da, d2a = _pow_family(alpha)
    V, dV, d2V = _pow_family(gamma)
    return CoefficientSpec(
        family="power-law", a=a, da=da, d2a=d2a, V=V, dV=dV, d2V=d2V,
        W=W, dW=dW, d2W=d2W, kappa=kappa, alpha=alpha, gamma=gamma,
        unit_diffusion=(alpha == 0.0),
        label=label or f"power-law(kappa={kappa:g}, alpha={alpha:g}, gamma={gamma:g})",
    )


def coarsening_spec(alpha: float, gamma: float) -> CoefficientSpec:
    """Classical coarsening normalization: W=1+x, a=(1+x)^alpha, V=(1+x)^(1-gamma).

    ``alpha`` and ``gamma`` are the attachment/evaporation rate exponents;
    the corresponding V exponent is ``1-gamma``.
    """
    return power_law(1.0, alpha, 1.0 - gamma,
                     label=f"coarsening(alpha={alpha:g}, gamma={gamma:g})")


def tabulated_spec(x, a, V, W, label: str = "tabulated") -> CoefficientSpec:
    """Monotone-cubic interpolated spec from sampled columns."""
    x = np.asarray(x, dtype=float)
    pa = PchipInterpolator(x, np.asarray(a, dtype=float))
    pV = PchipInterpolator(x, np.asarray(V, dtype=float))
    pW = PchipInterpolator(x, np.asarray(W, dtype=float))
    return CoefficientSpec(
        family="tabulated",
        a=pa, da=pa.derivative(1), d2a=pa.derivative(2),
        V=pV, dV=pV.derivative(1), d2V=pV.derivative(2),
        W=pW, dW=pW.derivative(1), d2W=pW.derivative(2),
        label=label, meta={"x_max": float(x[-1])},
    )


def custom_spec(a, da, d2a, V, dV, d2V, W, dW, d2W,
                label: str = "custom", unit_diffusion: bool = False) -> CoefficientSpec:
    """Spec from user-supplied vectorized callables (derivatives required)."""
    return CoefficientSpec(
        family="custom", a=a, da=da, d2a=d2a, V=V, dV=dV, d2V=d2V,
        W=W, dW=dW, d2W=d2W, label=label, unit_diffusion=unit_diffusion,
    )


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_x: Optional[float] = None
    value: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class AdmissibilityReport:
    """Per-condition verdicts; ``admissible`` iff every check passed."""

    checks: tuple
    certified_window: Optional[tuple] = None
    exponent_verdict: Optional[str] = None

    @property
    def admissible(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            mark = "pass" if c.passed else "FAIL"
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(f"  [{mark}] {c.name}{extra}")
        if self.certified_window is not None:
            lo, hi = self.certified_window
            lines.append(f"  certified tail window: [{lo:g}, {hi:g}]")
        if self.exponent_verdict is not None:
            lines.append(f"  exponent verdict: {self.exponent_verdict}")
        head = "admissible" if self.admissible else "NOT admissible"
        return head + "\n" + "\n".join(lines)


def check_admissibility(kappa: float, alpha: float, gamma: float) -> AdmissibilityReport:
    """Exact exponent-range verdict for the power-law family.

    Admissible iff 0 < kappa <= 2, max(2-2*kappa, 0) <= alpha <= 2-kappa and
    0 < gamma < min(2-alpha, kappa).
    """
    checks = []
    ok = 0.0 < kappa <= 2.0
    checks.append(CheckResult("kappa_range", ok, value=kappa,
                              detail="requires 0 < kappa <= 2"))
    lo_a = max(2.0 - 2.0 * kappa, 0.0)
    hi_a = 2.0 - kappa
    ok = lo_a <= alpha <= hi_a
    checks.append(CheckResult(
        "alpha_range", ok, value=alpha,
        detail=f"requires {lo_a:g} <= alpha <= {hi_a:g}"))
    hi_g = min(2.0 - alpha, kappa)
    ok = 0.0 < gamma < hi_g
    checks.append(CheckResult(
        "gamma_range", ok, value=gamma,
        detail=f"requires 0 < gamma < {hi_g:g}"))
    verdict = "admissible" if all(c.passed for c in checks) else (
        "inadmissible: " + ", ".join(c.name for c in checks if not c.passed))
    return AdmissibilityReport(checks=tuple(checks), exponent_verdict=verdict)


def _tail_slope(x, q):
    """Log-log slope of q over the last decade of the grid (least squares)."""
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = x >= x[-1] / 10.0
    if mask.sum() < 8:
        mask = np.zeros_like(mask)
        mask[-max(8, len(x) // 4):] = True
    lx = np.log(1.0 + x[mask])
    lq = np.log(np.maximum(q[mask], 1e-300))
    A = np.vstack([lx, np.ones_like(lx)]).T
    slope, _ = np.linalg.lstsq(A, lq, rcond=None)[0]
    return float(slope)


def verify_assumptions(spec: CoefficientSpec, grid, delta: float = 0.1,
                       slope_tol: float = 0.05) -> AdmissibilityReport:
    """Numerically certify the structural assumptions on a finite grid.

    Checks, in order: (a) growth bound on the combined second-derivative
    quantity, (b) positivity of ``a`` and strict monotonicity of ``W``,
    (c) the tail smallness conditions with margin ``delta`` beyond a located
    threshold, (d) the two-sided bound on ``a*W'^2`` against ``W``, and
    (e) integrability of ``W/a*exp(-V)``.  A finite grid certifies the tail
    conditions only on the reported window ``[x_delta, x_max]``.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise ValueError("grid must be nonempty")
    ev = spec.evaluate(x)
    for key, arr in ev.items():
        if not np.all(np.isfinite(arr)):
            bad = x[~np.isfinite(np.asarray(arr))]
            raise EvaluationFailure(
                f"evaluator {key!r} non-finite at x={bad[:3]}")
    a, da, d2a = ev["a"], ev["da"], ev["d2a"]
    dV, d2V = ev["dV"], ev["d2V"]
    W, dW, d2W = ev["W"], ev["dW"], ev["d2W"]

    checks = []

    # (a) combined growth bound stays bounded along the grid
    q = (np.abs(d2V) + np.abs(d2W)) * a + (np.abs(dV) + np.abs(dW)) * np.abs(da) \
        + np.abs(d2a)
    slope = _tail_slope(x, q)
    i = int(np.argmax(q))
    checks.append(CheckResult(
        "growth_bound", slope <= slope_tol, worst_x=float(x[i]),
        value=float(q[i]),
        detail=f"sup={q[i]:.3g}, tail slope={slope:+.3f}"))

    # (b) a > 0, W strictly increasing, W(0) > 0
    ok_a = bool(np.all(a > 0.0))
    ok_w = bool(np.all(dW > 0.0)) and float(W[0]) > 0.0 if x[0] == 0.0 \
        else bool(np.all(dW > 0.0)) and float(spec.W(np.asarray(0.0))) > 0.0
    i = int(np.argmin(a))
    j = int(np.argmin(dW))
    checks.append(CheckResult(
        "positivity_monotonicity", ok_a and ok_w,
        worst_x=float(x[i if not ok_a else j]),
        value=float(a[i] if not ok_a else dW[j]),
        detail=f"min a={a[i]:.3g}, min W'={dW[j]:.3g}"))

    # (c) tail smallness with margin delta beyond a located threshold
    lhs1 = np.abs(dV) + np.abs(da / a)
    d2loga = d2a / a - (da / a) ** 2
    lhs2 = np.abs(d2V) + np.abs(d2loga) + np.abs(d2W)
    good = (lhs1 <= delta * dW) & (lhs2 <= delta * dW ** 2)
    window = None
    if good[-1]:
        # smallest sample index from which on both conditions hold
        bad_idx = np.nonzero(~good)[0]
        start = 0 if bad_idx.size == 0 else int(bad_idx[-1]) + 1
        window = (float(x[start]), float(x[-1]))
        checks.append(CheckResult(
            "tail_smallness", True, worst_x=float(x[start]),
            detail=f"holds with margin {delta:g} for x >= {x[start]:g}"))
    else:
        checks.append(CheckResult(
            "tail_smallness", False, worst_x=float(x[-1]),
            detail=f"violated at the grid end with margin {delta:g}"))

    # (d) two-sided bound: a*W'^2 bounded below, a*W'^2/W bounded above
    r = a * dW ** 2
    s = r / np.maximum(W, 1e-300)
    lo_ok = bool(np.all(r > 0.0)) and _tail_slope(x, r) >= -slope_tol
    hi_ok = _tail_slope(x, s) <= slope_tol
    checks.append(CheckResult(
        "two_sided_bound", lo_ok and hi_ok,
        worst_x=float(x[int(np.argmin(r))]),
        value=float(np.min(r)),
        detail=f"c0~{np.min(r):.3g}, C0~{np.max(s):.3g}, "
               f"tail slopes {_tail_slope(x, r):+.2f}/{_tail_slope(x, s):+.2f}"))

    # (e) integrability of W a^-1 e^-V
    try:
        val, err = tail_integral(lambda y: spec.W(y) / spec.a(y)
                                 * np.exp(-spec.V(y)))
        checks.append(CheckResult(
            "integrability", True, value=val,
            detail=f"integral={val:.6g} (err~{err:.1e})"))
    except DivergentIntegral as exc:
        checks.append(CheckResult("integrability", False, detail=str(exc)))

    verdict = None
    if spec.family == "power-law":
        verdict = check_admissibility(spec.kappa, spec.alpha,
                                      spec.gamma).exponent_verdict
    return AdmissibilityReport(checks=tuple(checks),
                               certified_window=window,
                               exponent_verdict=verdict)


# ---------------------------------------------------------------------------
# semi-infinite quadrature
# ---------------------------------------------------------------------------

def _panel(f, a: float, b: float):
    """High-order Gauss panel with an embedded error estimate."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x48, w48 = _GL48
    x24, w24 = _GL24
    v48 = half * float(w48 @ f(mid + half * x48))
    v24 = half * float(w24 @ f(mid + half * x24))
    return v48, abs(v48 - v24)


def tail_integral(f, x0: float = 0.0, rel_floor: float = 1e-14,
                  max_panels: int = 240):
    """Adaptive integral of ``f`` over ``[x0, inf)`` for decaying integrands.

    Panels double geometrically; integration stops once the local panel
    contribution stays below ``rel_floor`` times the running total for three
    consecutive panels, after which an exponential bound on the remaining
    tail (from the local log-slope) is added.  Raises
    :class:`DivergentIntegral` when the tail fails to decay.
    """
    edges_lo = x0
    width = 1.0
    total = 0.0
    err = 0.0
    small_run = 0
    history = []
    b = x0
    for _ in range(max_panels):
        a_edge = b
        b = a_edge + width
        v, e = _panel(f, a_edge, b)
        if not math.isfinite(v):
            raise EvaluationFailure(
                f"integrand non-finite on panel [{a_edge:g}, {b:g}]")
        total += v
        err += e
        history.append(v)
        scale = max(abs(total), 1e-300)
        if abs(v) <= rel_floor * scale:
            small_run += 1
            if small_run >= 3:
                # exponential tail bound from the local decay rate
                fa = float(np.asarray(f(np.asarray([a_edge]))).ravel()[0])
                fb = float(np.asarray(f(np.asarray([b]))).ravel()[0])
                if fb > 0.0 and fa > fb:
                    lam = (math.log(fa) - math.log(fb)) / (b - a_edge)
                    tail = fb / lam
                else:
                    tail = abs(fb) * (b - a_edge)
                total += tail
                err += tail + 1e-16 * abs(total)
                return total, err
        else:
            small_run = 0
        width *= 2.0
    # stop rule never met: classify
    recent = history[-4:]
    raise DivergentIntegral(
        f"tail of integrand fails to decay on [{edges_lo:g}, {b:g}]; "
        f"last panel contributions {[f'{v:.2e}' for v in recent]}")


# ---------------------------------------------------------------------------
# critical mass and equilibrium order parameter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalData:
    """Critical mass with quadrature error and the map rho -> theta_eq."""

    rho_s: float
    error: float
    theta_eq: Callable

    def __float__(self):
        return self.rho_s


def _w_mass_integrand(spec: CoefficientSpec, theta: float):
    def f(x):
        x = np.asarray(x, dtype=float)
        return spec.W(x) / spec.a(x) * np.exp(-spec.V(x) + theta * spec.W(x))
    return f


def w_mass_of_theta(spec: CoefficientSpec, theta: float) -> float:
    """Equilibrium W-mass integral at order parameter ``theta <= 0``."""
    val, _ = tail_integral(_w_mass_integrand(spec, theta))
    return val


def rho_s(spec: CoefficientSpec) -> CriticalData:
    """Critical mass: integral of W a^-1 exp(-V) over the half line."""
    value, err = tail_integral(_w_mass_integrand(spec, 0.0))

    def _theta_eq(rho, theta_min=-50.0, tol=1e-10):
        return theta_eq(spec, rho, theta_min=theta_min, tol=tol,
                        _rho_s_value=value)

    return CriticalData(rho_s=value, error=err, theta_eq=_theta_eq)


def theta_eq(spec: CoefficientSpec, rho: float, theta_min: float = -50.0,
             tol: float = 1e-10, _rho_s_value: Optional[float] = None) -> float:
    """Equilibrium order parameter for total mass ``rho``.

    Returns 0 for ``rho >= rho_s``; otherwise the unique negative root of
    ``theta + int W c_theta^eq = rho`` located by bisection (residual
    below ``tol``).
    """
    if not math.isfinite(rho):
        raise ValueError("rho must be finite")
    rs = _rho_s_value if _rho_s_value is not None \
        else tail_integral(_w_mass_integrand(spec, 0.0))[0]
    if rho >= rs:
        return 0.0

    def g(th):
        return th + w_mass_of_theta(spec, th) - rho

    lo, hi = theta_min, 0.0
    glo = g(lo)
    if glo > 0.0:
        raise BracketFailure(
            f"no bracket: map at theta_min={theta_min:g} still exceeds rho={rho:g}")
    ghi = rs - rho  # g(0) without re-integrating
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol:
            return mid
        if gm * glo <= 0.0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if hi - lo < 1e-16 * max(1.0, abs(mid)):
            return mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# unit-diffusion change of variables
# ---------------------------------------------------------------------------

class _CoordinateMap:
    """Monotone map z(x) = int_0^x a^{-1/2} and its inverse x(z)."""

    def __init__(self, spec: CoefficientSpec, x_max: float = 64.0):
        self._spec = spec
        self._x = np.concatenate([[0.0], np.geomspace(1e-4, x_max, 600)])
        self._rebuild()

    def _rebuild(self):
        x = self._x
        a_vals = np.asarray(self._spec.a(x), dtype=float)
        if np.any(~np.isfinite(a_vals)) or np.any(a_vals <= 0.0):
            raise InversionFailure("a(x) must be positive and finite")
        nodes, wts = _GL24
        lo = x[:-1]
        hi = x[1:]
        halfw = 0.5 * (hi - lo)
        mids = 0.5 * (hi + lo)
        pts = mids[None, :] + halfw[None, :] * nodes[:, None]
        vals = 1.0 / np.sqrt(self._spec.a(pts))
        seg = halfw * (wts @ vals)
        if np.any(seg <= 0.0):
            raise InversionFailure("z(x) is not strictly increasing")
        self._z = np.concatenate([[0.0], np.cumsum(seg)])
        self._inv = PchipInterpolator(self._z, self._x)

    def _extend_to_x(self, x_max: float):
        while self._x[-1] < x_max:
            add = np.geomspace(self._x[-1] * 1.05, self._x[-1] * 8.0, 64)
            self._x = np.concatenate([self._x, add])
        self._rebuild()

    def _extend_to_z(self, z_max: float):
        for _ in range(64):
            if self._z[-1] >= z_max:
                return
            self._extend_to_x(self._x[-1] * 8.0)
        raise InversionFailure(f"cannot cover z={z_max:g}; z(x) grows too slowly")

    def z_of_x(self, x):
        x = np.asarray(x, dtype=float)
        scal = (x.ndim == 0)
        xf = np.atleast_1d(x).astype(float)
        if np.any(xf < 0.0):
            raise ValueError("x must be nonnegative")
        if xf.size and xf.max() > self._x[-1]:
            self._extend_to_x(float(xf.max()) * 1.25)
        idx = np.clip(np.searchsorted(self._x, xf, side="right") - 1,
                      0, len(self._x) - 1)
        x0 = self._x[idx]
        nodes, wts = _GL24
        halfw = 0.5 * (xf - x0)
        mids = 0.5 * (xf + x0)
        pts = mids[None, :] + halfw[None, :] * nodes[:, None]
        vals = 1.0 / np.sqrt(self._spec.a(pts))
        out = self._z[idx] + halfw * (wts @ vals)
        return float(out[0]) if scal else out

    def x_of_z(self, z):
        z = np.asarray(z, dtype=float)
        scal = (z.ndim == 0)
        zf = np.atleast_1d(z).astype(float)
        if np.any(zf < -1e-9):
            raise ValueError("z must be nonnegative")
        zf = np.clip(zf, 0.0, None)
        if zf.size and zf.max() > self._z[-1]:
            self._extend_to_z(float(zf.max()) * 1.05)
        xk = np.clip(self._inv(zf), 0.0, None)
        for _ in range(4):
            resid = self.z_of_x(xk) - zf
            xk = np.clip(xk - resid * np.sqrt(self._spec.a(xk)), 0.0, None)
        out = xk
        return float(out[0]) if scal else out


def transform_unit_diffusion(spec: CoefficientSpec) -> CoefficientSpec:
    """Change variables so the diffusivity becomes identically one.

    The new coordinate is ``z(x) = int_0^x a(s)^{-1/2} ds`` with potentials
    ``V~(z) = V(x(z)) + log(a(x(z)))/2`` and ``W~(z) = W(x(z))``; derivative
    evaluators are exact compositions (no numerical differentiation).
    The returned spec carries the map in ``meta['map']``.
    """
    probe = np.array([0.0, 0.5, 1.0, 7.0, 123.0])
    a_probe = np.asarray(spec.a(probe), dtype=float)
    if not np.all(np.isfinite(a_probe)):
        raise EvaluationFailure("a(x) non-finite at probe points")
    if np.all(a_probe == 1.0):
        # already unit diffusion: identity map
        one, zero = _pow_family(0.0)[0], _pow_family(0.0)[1]
        return replace(spec, a=one, da=zero, d2a=zero, unit_diffusion=True,
                       family="transformed",
                       label=f"unit[{spec.label}]",
                       meta={"map": None, "base": spec})
    if np.any(a_probe <= 0.0):
        raise InversionFailure("a(x) must be strictly positive")

    cmap = _CoordinateMap(spec)

    def _x(z):
        return cmap.x_of_z(np.asarray(z, dtype=float))

    def Vt(z):
        x = _x(z)
        return spec.V(x) + 0.5 * np.log(spec.a(x))

    def dVt(z):
        x = _x(z)
        sq = np.sqrt(spec.a(x))
        return spec.dV(x) * sq + spec.da(x) / (2.0 * sq)

    def d2Vt(z):
        x = _x(z)
        a = spec.a(x)
        da = spec.da(x)
        return (spec.d2V(x) * a + 0.5 * spec.dV(x) * da
                + 0.5 * spec.d2a(x) - da * da / (4.0 * a))

    def Wt(z):
        return spec.W(_x(z))

    def dWt(z):
        x = _x(z)
        return spec.dW(x) * np.sqrt(spec.a(x))

    def d2Wt(z):
        x = _x(z)
        return spec.d2W(x) * spec.a(x) + 0.5 * spec.dW(x) * spec.da(x)

    one = _pow_family(0.0)[0]
    zero = _pow_family(0.0)[1]
    return CoefficientSpec(
        family="transformed", a=one, da=zero, d2a=zero,
        V=Vt, dV=dVt, d2V=d2Vt, W=Wt, dW=dWt, d2W=d2Wt,
        unit_diffusion=True, label=f"unit[{spec.label}]",
        meta={"map": cmap, "base": spec},
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def spec_to_dict(spec: CoefficientSpec) -> dict:
    if spec.family == "power-law":
        return {"family": "power-law", "kappa": spec.kappa,
                "alpha": spec.alpha, "gamma": spec.gamma}
    if spec.family == "tabulated":
        raise ValueError("serialize tabulated specs from their source table")
    raise ValueError(f"cannot serialize family {spec.family!r}")


def spec_from_dict(d: dict) -> CoefficientSpec:
    """Build a spec from a configuration mapping.

    Schema: ``family`` one of ``power-law`` (keys ``kappa``, ``alpha``,
    ``gamma``), ``coarsening`` (keys ``alpha``, ``gamma``) or ``tabulated``
    (key ``table`` with columns ``x``, ``a``, ``V``, ``W``).
    """
    fam = d.get("family")
    if fam == "power-law":
        return power_law(float(d["kappa"]), float(d["alpha"]),
                         float(d["gamma"]))
    if fam == "coarsening":
        return coarsening_spec(float(d["alpha"]), float(d["gamma"]))
    if fam == "tabulated":
        t = d["table"]
        return tabulated_spec(t["x"], t["a"], t["V"], t["W"])
    raise ValueError(f"unknown coefficient family {fam!r}")
