"""Pure-numpy fallback implementations of the hot loops.

Mirrors the semantics of :mod:`bdfamily._kernels_numba`; selected via the
``BDFAMILY_NO_NUMBA`` environment variable.
"""
import numpy as np

BOUNDARY_EXPONENTIAL = 0
BOUNDARY_MONOMER = 1

CONS_CONTINUUM = 0
CONS_FAMILY_MASS = 1
CONS_FAMILY_MONOMER = 2


def kahan_cumsum(x):
    # cumulative sums are accurate enough in float64 at the grid sizes used
    return np.cumsum(x)


def _boundary_c0(btag, bp0, bp1, theta):
    if btag == BOUNDARY_EXPONENTIAL:
        return np.exp(bp0 + theta * bp1)
    return bp0 + theta


def _family_residual(theta, c, eps, lam, gam, btag, bp0, bp1, ctag, rho, zs):
    n = c.shape[0]
    lam_e = lam[:n]
    gam_e = gam[:n]
    if btag == BOUNDARY_EXPONENTIAL:
        dlc0, d2lc0 = bp1, 0.0
    else:
        if bp0 + theta <= 0.0:
            return 0.0, 0.0, False
        dlc0 = 1.0 / (bp0 + theta)
        d2lc0 = -dlc0 * dlc0
    f = 1.0 + eps * (theta * lam_e - gam_e)
    if np.any(f <= 0.0):
        return 0.0, 0.0, False
    weps = dlc0 + eps * np.cumsum(lam_e / f)
    dweps = d2lc0 - eps * np.cumsum(eps * lam_e * lam_e / (f * f))
    if ctag == CONS_FAMILY_MASS:
        hp, hpp = rho - theta, -1.0
    else:
        hp = rho / (zs + theta) - 1.0
        hpp = -rho / (zs + theta) ** 2
    return (eps * float(weps @ c) - hp, eps * float(dweps @ c) - hpp, True)


def solve_theta_family(c, eps, lam, gam, btag, bp0, bp1, ctag, rho, zs,
                       theta0, th_lo, th_hi, tol):
    n = lam.shape[0] - 1
    lam_e = lam[:n]
    gam_e = gam[:n]
    lo, hi = th_lo, th_hi
    pos = lam_e > 0.0
    neg = lam_e < 0.0
    if np.any(pos):
        lo = max(lo, float(np.max((gam_e[pos] - 1.0 / eps) / lam_e[pos])))
    if np.any(neg):
        hi = min(hi, float(np.min((gam_e[neg] - 1.0 / eps) / lam_e[neg])))
    if btag == BOUNDARY_MONOMER:
        lo = max(lo, -bp0)
    pad = 1e-12 * (1.0 + abs(lo) + abs(hi))
    lo += pad
    hi -= pad
    if not lo < hi:
        return theta0, False

    args = (c, eps, lam, gam, btag, bp0, bp1, ctag, rho, zs)
    theta = theta0 if lo < theta0 < hi else 0.5 * (lo + hi)
    r, dr, ok = _family_residual(theta, *args)
    if ok and abs(r) <= tol:
        return theta, True
    for _ in range(60):
        if not ok or dr == 0.0:
            break
        step = -r / dr
        improved = False
        for _ in range(40):
            cand = theta + step
            if cand <= lo:
                cand = 0.5 * (theta + lo)
            elif cand >= hi:
                cand = 0.5 * (theta + hi)
            r2, dr2, ok2 = _family_residual(cand, *args)
            if ok2 and abs(r2) < abs(r):
                theta, r, dr, ok = cand, r2, dr2, True
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if abs(r) <= tol:
            return theta, True
    # bisection fallback
    m = 128
    prev_th = lo
    r_prev, _, ok_prev = _family_residual(prev_th, *args)
    found = False
    for k in range(1, m + 1):
        th = lo + (hi - lo) * k / m
        rk, _, okk = _family_residual(th, *args)
        if ok_prev and okk and r_prev * rk <= 0.0:
            a_br, b_br, ra = prev_th, th, r_prev
            found = True
            break
        prev_th, r_prev, ok_prev = th, rk, okk
    if not found:
        return theta, False
    for _ in range(200):
        mid = 0.5 * (a_br + b_br)
        rm, _, okm = _family_residual(mid, *args)
        if not okm:
            return theta, False
        if abs(rm) <= tol or (b_br - a_br) < 4e-16 * (1.0 + abs(mid)):
            return mid, True
        if ra * rm <= 0.0:
            b_br = mid
        else:
            a_br, ra = mid, rm
    return 0.5 * (a_br + b_br), True


def _cfl_dt(eps, a, lam, gam, theta, safety):
    mx = float(np.max(a * (1.0 + eps * np.abs(theta * lam - gam))))
    return safety * eps * eps / (2.0 * mx)


def family_run_block(c, eps, a, lam, gam, w, btag, bp0, bp1, ctag, rho, zs,
                     theta, t, nsteps, dt_fixed, use_cfl, safety,
                     th_lo, th_hi, tol):
    n = c.shape[0]
    lam_e = lam[:n]
    gam_e = gam[:n]
    a_e = a[:n]
    a_r = a[1:]
    w_i = w[1:]
    dt = dt_fixed
    eJ = np.empty(n + 1)
    eJ[n] = 0.0
    for step_i in range(nsteps):
        if use_cfl:
            dt = _cfl_dt(eps, a, lam, gam, theta, safety)
        c0 = _boundary_c0(btag, bp0, bp1, theta)
        f = 1.0 + eps * (theta * lam_e - gam_e)
        cprev = np.empty(n)
        cprev[0] = c0
        cprev[1:] = c[:-1]
        eJ[:n] = a_e * f * cprev - a_r * c
        c += (dt / (eps * eps)) * (eJ[:n] - eJ[1:])
        if np.any(c < 0.0):
            site = int(np.argmax(c < 0.0)) + 1
            return theta, t, 1, site, step_i, dt
        if ctag == CONS_CONTINUUM:
            theta = rho - eps * float(w_i @ c)
        else:
            theta, ok = solve_theta_family(c, eps, lam, gam, btag, bp0, bp1,
                                           ctag, rho, zs, theta,
                                           th_lo, th_hi, tol)
            if not ok:
                return theta, t, 2, -1, step_i, dt
        t += dt
    return theta, t, 0, -1, nsteps, dt


def bd_cfl_dt(c, ar, br, safety):
    c1 = c[0]
    mx = float(np.max(ar * c1 + br))
    drain = 2.0 * ar[0] * c1 + float(ar[1:] @ c[1:])
    lim = 1.0 / (2.0 * mx)
    if drain > 0.0:
        lim = min(lim, 1.0 / drain)
    return safety * lim


def bd_run_block(c, ar, br, nsteps, dt_fixed, use_cfl, safety, t):
    L = c.shape[0]
    J = np.empty(L)
    J[L - 1] = 0.0
    dc = np.empty(L)
    dt = dt_fixed
    for step_i in range(nsteps):
        if use_cfl:
            dt = bd_cfl_dt(c, ar, br, safety)
        c1 = c[0]
        J[:L - 1] = ar[:L - 1] * c1 * c[:L - 1] - br[1:] * c[1:]
        dc[0] = -J[0] - float(np.sum(J[:L - 1]))
        dc[1:] = J[:L - 1] - J[1:]
        c += dt * dc
        if np.any(c < 0.0):
            return t, 1, int(np.argmax(c < 0.0)), step_i, dt
        t += dt
    return t, 0, -1, nsteps, dt
