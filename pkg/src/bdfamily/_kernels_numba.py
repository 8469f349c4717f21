"""Numba-compiled inner loops for the explicit time steppers.

Array conventions: site arrays (``a``, ``lam``, ``gam``, ``w``) have length
N+1 and cover the sites 0..N (site 0 is the Dirichlet ghost); the density
``c`` has length N and covers the interior sites 1..N.  Becker-Doring arrays
are 0-indexed over cluster sizes 1..L.

Status codes returned by the blocks:
    0  ok
    1  positivity loss in the update (site index attached)
    2  constraint solve failed (no bracket / no convergence)
    3  positivity condition violated in the equilibrium factors
"""
import numpy as np
from numba import njit

BOUNDARY_EXPONENTIAL = 0
BOUNDARY_MONOMER = 1

CONS_CONTINUUM = 0
CONS_FAMILY_MASS = 1
CONS_FAMILY_MONOMER = 2


@njit(cache=True)
def kahan_cumsum(x):
    out = np.empty_like(x)
    s = 0.0
    comp = 0.0
    for i in range(x.shape[0]):
        y = x[i] - comp
        tt = s + y
        comp = (tt - s) - y
        s = tt
        out[i] = s
    return out


@njit(cache=True, inline="always")
def _boundary_c0(btag, bp0, bp1, theta):
    if btag == BOUNDARY_EXPONENTIAL:
        return np.exp(bp0 + theta * bp1)
    return bp0 + theta


@njit(cache=True)
def _family_residual(theta, c, eps, lam, gam, btag, bp0, bp1, ctag, rho, zs):
    # returns (R, dR/dtheta, ok)
    n = c.shape[0]
    if btag == BOUNDARY_EXPONENTIAL:
        dlc0 = bp1
        d2lc0 = 0.0
    else:
        if bp0 + theta <= 0.0:
            return 0.0, 0.0, False
        dlc0 = 1.0 / (bp0 + theta)
        d2lc0 = -1.0 / ((bp0 + theta) * (bp0 + theta))
    s = 0.0
    ds = 0.0
    acc = 0.0
    dacc = 0.0
    for i in range(n):
        f = 1.0 + eps * (theta * lam[i] - gam[i])
        if f <= 0.0:
            return 0.0, 0.0, False
        s += lam[i] / f
        ds -= eps * lam[i] * lam[i] / (f * f)
        acc += (dlc0 + eps * s) * c[i]
        dacc += (d2lc0 + eps * ds) * c[i]
    if ctag == CONS_FAMILY_MASS:
        hp = rho - theta
        hpp = -1.0
    else:
        hp = rho / (zs + theta) - 1.0
        hpp = -rho / ((zs + theta) * (zs + theta))
    return eps * acc - hp, eps * dacc - hpp, True


@njit(cache=True)
def solve_theta_family(c, eps, lam, gam, btag, bp0, bp1, ctag, rho, zs,
                       theta0, th_lo, th_hi, tol):
    """Safeguarded Newton for the nonlocal constraint; returns (theta, ok)."""
    n = lam.shape[0] - 1
    # positivity restricts the admissible theta range
    lo = th_lo
    hi = th_hi
    for i in range(n):
        if lam[i] > 0.0:
            b = (gam[i] - 1.0 / eps) / lam[i]
            if b > lo:
                lo = b
        elif lam[i] < 0.0:
            b = (gam[i] - 1.0 / eps) / lam[i]
            if b < hi:
                hi = b
    if btag == BOUNDARY_MONOMER and -bp0 > lo:
        lo = -bp0
    pad = 1e-12 * (1.0 + abs(lo) + abs(hi))
    lo += pad
    hi -= pad
    if not (lo < hi):
        return theta0, False

    theta = theta0
    if theta <= lo or theta >= hi:
        theta = 0.5 * (lo + hi)
    r, dr, ok = _family_residual(theta, c, eps, lam, gam, btag, bp0, bp1,
                                 ctag, rho, zs)
    if ok and abs(r) <= tol:
        return theta, True
    for _ in range(60):
        if not ok:
            break
        if dr == 0.0:
            break
        step = -r / dr
        # damped update, keep inside the admissible interval
        improved = False
        for _ in range(40):
            cand = theta + step
            if cand <= lo:
                cand = 0.5 * (theta + lo)
            elif cand >= hi:
                cand = 0.5 * (theta + hi)
            r2, dr2, ok2 = _family_residual(cand, c, eps, lam, gam, btag,
                                            bp0, bp1, ctag, rho, zs)
            if ok2 and abs(r2) < abs(r):
                theta = cand
                r = r2
                dr = dr2
                ok = True
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if abs(r) <= tol:
            return theta, True
    # bisection fallback on a scanned sign change
    m = 128
    prev_th = lo
    r_prev, _, ok_prev = _family_residual(prev_th, c, eps, lam, gam, btag,
                                          bp0, bp1, ctag, rho, zs)
    found = False
    a_br = lo
    b_br = hi
    ra = 0.0
    for k in range(1, m + 1):
        th = lo + (hi - lo) * k / m
        rk, _, okk = _family_residual(th, c, eps, lam, gam, btag, bp0, bp1,
                                      ctag, rho, zs)
        if ok_prev and okk and r_prev * rk <= 0.0:
            a_br = prev_th
            b_br = th
            ra = r_prev
            found = True
            break
        prev_th = th
        r_prev = rk
        ok_prev = okk
    if not found:
        return theta, False
    for _ in range(200):
        mid = 0.5 * (a_br + b_br)
        rm, _, okm = _family_residual(mid, c, eps, lam, gam, btag, bp0, bp1,
                                      ctag, rho, zs)
        if not okm:
            return theta, False
        if abs(rm) <= tol or (b_br - a_br) < 4e-16 * (1.0 + abs(mid)):
            return mid, True
        if ra * rm <= 0.0:
            b_br = mid
        else:
            a_br = mid
            ra = rm
    return 0.5 * (a_br + b_br), True


@njit(cache=True)
def _cfl_dt(eps, a, lam, gam, theta, safety):
    n1 = a.shape[0]
    mx = 0.0
    for i in range(n1):
        v = a[i] * (1.0 + eps * abs(theta * lam[i] - gam[i]))
        if v > mx:
            mx = v
    return safety * eps * eps / (2.0 * mx)


@njit(cache=True)
def family_run_block(c, eps, a, lam, gam, w, btag, bp0, bp1, ctag, rho, zs,
                     theta, t, nsteps, dt_fixed, use_cfl, safety,
                     th_lo, th_hi, tol):
    """Advance ``nsteps`` explicit Euler steps in place.

    Returns (theta, t, status, site, steps_done, dt_last).
    """
    n = c.shape[0]
    eJ = np.empty(n + 1)
    dt = dt_fixed
    for step_i in range(nsteps):
        if use_cfl:
            dt = _cfl_dt(eps, a, lam, gam, theta, safety)
        c0 = _boundary_c0(btag, bp0, bp1, theta)
        # edge fluxes (times eps); edge i sits between sites i and i+1
        cprev = c0
        for i in range(n):
            f = 1.0 + eps * (theta * lam[i] - gam[i])
            eJ[i] = a[i] * f * cprev - a[i + 1] * c[i]
            cprev = c[i]
        eJ[n] = 0.0
        coef = dt / (eps * eps)
        for i in range(n):
            c[i] += coef * (eJ[i] - eJ[i + 1])
            if c[i] < 0.0:
                return theta, t, 1, i + 1, step_i, dt
        if ctag == CONS_CONTINUUM:
            s = 0.0
            comp = 0.0
            for i in range(n):
                y = w[i + 1] * c[i] - comp
                tt = s + y
                comp = (tt - s) - y
                s = tt
            theta = rho - eps * s
        else:
            theta, ok = solve_theta_family(c, eps, lam, gam, btag, bp0, bp1,
                                           ctag, rho, zs, theta,
                                           th_lo, th_hi, tol)
            if not ok:
                return theta, t, 2, -1, step_i, dt
        t += dt
    return theta, t, 0, -1, nsteps, dt


@njit(cache=True)
def bd_cfl_dt(c, ar, br, safety):
    L = c.shape[0]
    c1 = c[0]
    mx = 0.0
    for i in range(L):
        v = ar[i] * c1 + br[i]
        if v > mx:
            mx = v
    drain = 2.0 * ar[0] * c1
    for i in range(1, L):
        drain += ar[i] * c[i]
    lim1 = 1.0 / (2.0 * mx)
    lim2 = 1.0 / drain if drain > 0.0 else lim1
    dt = lim1 if lim1 < lim2 else lim2
    return safety * dt


@njit(cache=True)
def bd_run_block(c, ar, br, nsteps, dt_fixed, use_cfl, safety, t):
    """Forward-Euler Becker-Doring steps in place.

    Returns (t, status, site, steps_done, dt_last).
    """
    L = c.shape[0]
    J = np.empty(L)
    dc = np.empty(L)
    dt = dt_fixed
    for step_i in range(nsteps):
        if use_cfl:
            dt = bd_cfl_dt(c, ar, br, safety)
        c1 = c[0]
        sumJ = 0.0
        comp = 0.0
        for i in range(L - 1):
            J[i] = ar[i] * c1 * c[i] - br[i + 1] * c[i + 1]
            y = J[i] - comp
            tt = sumJ + y
            comp = (tt - sumJ) - y
            sumJ = tt
        J[L - 1] = 0.0
        dc[0] = -J[0] - sumJ
        for i in range(1, L):
            dc[i] = J[i - 1] - J[i]
        for i in range(L):
            c[i] += dt * dc[i]
            if c[i] < 0.0:
                return t, 1, i, step_i, dt
        t += dt
    return t, 0, -1, nsteps, dt
