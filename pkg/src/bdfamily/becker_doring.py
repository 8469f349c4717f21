"""Direct Becker-Doring solver: monomer-exchange cluster kinetics.

Serves as an independent reference for the unit-spacing member of the
lattice family.  Cluster densities c_l, l = 1..L, evolve by the fluxes
J_l = a_l c_1 c_l - b_{l+1} c_{l+1} with truncation J_L = 0; the monomer
equation is integrated directly and the conserved mass sum(l c_l) is
monitored rather than eliminated.

Note on the critical density: some references print the critical sum
without the cluster-size weight; this implementation uses the
mass-weighted form sum(l Q_l z_s^l), consistent with the conservation law
sum(l c_l) = rho.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .equilibrium import (ConservationLaw, FamilyModel, Grid, MonomerLaw,
                          log_mean)
from .errors import DivergentSum, MassDrift, PositivityLoss, StepFailure

__all__ = [
    "BDRates", "BDState", "bd_Q", "bd_log_Q", "bd_rho_s", "bd_cfl_dt",
    "bd_step", "bd_free_energy", "bd_dissipation", "bd_equilibrium",
    "bd_equilibrium_z", "map_to_family", "bd_run",
]


@dataclass(frozen=True)
class BDRates:
    """Attachment/evaporation rate family a_l = a1*l^alpha, b_l = a_l*(z_s + q/l^gamma)."""

    a1: float = 1.0
    alpha: float = 1.0 / 3.0
    gamma: float = 1.0 / 3.0
    q: float = 1.0
    z_s: float = 1.0

    def __post_init__(self):
        if self.a1 <= 0 or self.q <= 0 or self.z_s <= 0:
            raise ValueError("a1, q, z_s must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")

    def a_of(self, ell):
        ell = np.asarray(ell, dtype=float)
        return self.a1 * ell ** self.alpha

    def b_of(self, ell):
        ell = np.asarray(ell, dtype=float)
        return self.a_of(ell) * (self.z_s + self.q / ell ** self.gamma)


@dataclass(frozen=True)
class BDState:
    """Cluster densities c_1..c_L with the conserved total mass."""

    c: np.ndarray
    rho: float
    t: float = 0.0

    @property
    def L(self) -> int:
        return len(self.c)

    @property
    def c1(self) -> float:
        return float(self.c[0])

    def mass(self) -> float:
        ell = np.arange(1, self.L + 1, dtype=float)
        return float(ell @ self.c)

    def validate(self, tol: float = 1e-10):
        if np.any(self.c < 0.0):
            raise ValueError("negative density")
        drift = abs(self.mass() - self.rho)
        if drift > tol * max(1.0, abs(self.rho)):
            raise MassDrift(f"mass drift {drift:.3e} exceeds tolerance")
        return self


def from_densities(c, t: float = 0.0) -> BDState:
    c = np.asarray(c, dtype=float).copy()
    ell = np.arange(1, len(c) + 1, dtype=float)
    return BDState(c=c, rho=float(ell @ c), t=t)


def bd_log_Q(rates: BDRates, L: int) -> np.ndarray:
    """log Q_l for l = 1..L, accumulated in log space."""
    ell = np.arange(1, L + 1, dtype=float)
    la = np.log(rates.a_of(ell[:-1]))
    lb = np.log(rates.b_of(ell[1:]))
    out = np.empty(L)
    out[0] = 0.0
    out[1:] = K.kahan_cumsum(la - lb)
    return out


def bd_Q(rates: BDRates, ell: int) -> float:
    """Partition coefficient Q_l = prod_{r<l} a_r / b_{r+1} (Q_1 = 1)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return float(np.exp(bd_log_Q(rates, ell)[-1]))


def bd_rho_s(rates: BDRates, rel_tail: float = 1e-12,
             max_terms: int = 200000) -> float:
    """Critical mass sum(l Q_l z_s^l), summed to a relative tail bound."""
    block = 1024
    total = 0.0
    start = 1
    log_q_prev = 0.0
    prev_term = None
    while start <= max_terms:
        stop = min(start + block - 1, max_terms)
        ell = np.arange(start, stop + 1, dtype=float)
        if start == 1:
            logq = bd_log_Q(rates, stop)
        else:
            la = np.log(rates.a_of(np.arange(start - 1, stop, dtype=float)))
            lb = np.log(rates.b_of(np.arange(start, stop + 1, dtype=float)))
            logq = log_q_prev + np.cumsum(la - lb)
        terms = ell * np.exp(logq + ell * math.log(rates.z_s))
        total += float(np.sum(terms))
        log_q_prev = logq[-1]
        last = float(terms[-1])
        if prev_term is not None and last < prev_term:
            ratio = last / prev_term if prev_term > 0 else 0.0
            tail = last * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
            if tail <= rel_tail * total:
                return total + tail
        prev_term = last
        start = stop + 1
    raise DivergentSum(
        f"partial sums fail the tail test after {max_terms} terms")


def _rate_arrays(rates: BDRates, L: int):
    ell = np.arange(1, L + 1, dtype=float)
    return rates.a_of(ell), rates.b_of(ell)


def bd_cfl_dt(rates: BDRates, state: BDState, safety: float = 0.9) -> float:
    """Explicit stability bound with the evaporation rate as the stiff term."""
    ar, br = _rate_arrays(rates, state.L)
    return float(K.bd_cfl_dt(state.c, ar, br, safety))


def bd_step(rates: BDRates, state: BDState, dt: float,
            mass_tol: float = 1e-10) -> BDState:
    """One forward-Euler step; raises on positivity loss or mass drift."""
    ar, br = _rate_arrays(rates, state.L)
    c = state.c.copy()
    t, status, site, _, _ = K.bd_run_block(c, ar, br, 1, float(dt), False,
                                           1.0, state.t)
    if status == 1:
        raise PositivityLoss(f"negative density for cluster size {site + 1}",
                             site=site + 1, t=state.t)
    new = replace(state, c=c, t=t)
    drift = abs(new.mass() - state.mass())
    if drift > mass_tol * max(1.0, abs(state.rho)):
        raise MassDrift(f"mass drift {drift:.3e} in one step")
    return new


def bd_free_energy(state: BDState, rates: BDRates) -> float:
    """Lyapunov sum c_l (log(c_l / Q_l) - 1); empty sites contribute zero."""
    logq = bd_log_Q(rates, state.L)
    c = state.c
    pos = c > 0.0
    val = -float(np.sum(c))
    val += float(np.sum(c[pos] * (np.log(c[pos]) - logq[pos])))
    return val


def bd_dissipation(state: BDState, rates: BDRates) -> float:
    """Entropy production sum J_l log(a_l c1 c_l / (b_{l+1} c_{l+1}))."""
    ar, br = _rate_arrays(rates, state.L)
    c = state.c
    up = ar[:-1] * c[0] * c[:-1]
    dn = br[1:] * c[1:]
    mask = (up > 0.0) & (dn > 0.0)
    out = 0.0
    out += float(np.sum((up[mask] - dn[mask])
                        * (np.log(up[mask]) - np.log(dn[mask]))))
    return out


def bd_equilibrium(rates: BDRates, z: float, L: int) -> np.ndarray:
    """Equilibrium densities Q_l z^l for l = 1..L."""
    ell = np.arange(1, L + 1, dtype=float)
    return np.exp(bd_log_Q(rates, L) + ell * math.log(z))


def bd_equilibrium_z(rates: BDRates, rho: float, L: int) -> float:
    """Monomer activity of the truncated equilibrium with mass ``rho``."""
    ell = np.arange(1, L + 1, dtype=float)
    logq = bd_log_Q(rates, L)

    def mass(z):
        return float(ell @ np.exp(logq + ell * math.log(z)))

    lo, hi = 1e-12, 1.0
    while mass(hi) < rho:
        hi *= 2.0
        if hi > 1e6:
            raise DivergentSum("equilibrium activity search diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) < rho:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def map_to_family(rates: BDRates, rho: float, n_sites: int) -> FamilyModel:
    """Unit-spacing family member equivalent to the truncated BD system.

    Site x holds cluster size x+1, so ``n_sites`` interior sites cover
    clusters 2..n_sites+1 and the ghost carries the monomer; the matching
    BD truncation is L = n_sites + 1.
    """
    x = np.arange(0, n_sites + 1, dtype=float)
    ell = x + 1.0
    a_ell = rates.a_of(ell)
    b_ell = rates.b_of(ell)
    lam = a_ell / b_ell
    return FamilyModel(
        grid=Grid(1.0, n_sites),
        a=b_ell, lam=lam, gam=1.0 - rates.z_s * lam,
        boundary=MonomerLaw(z_s=rates.z_s),
        conservation=ConservationLaw(mode="family", rho=rho, kind="monomer",
                                     z_s=rates.z_s),
        w=ell, label=f"bd(alpha={rates.alpha:g}, gamma={rates.gamma:g})",
        theta_bracket=(-rates.z_s + 1e-12, 50.0),
    )


def bd_run(rates: BDRates, state0: BDState, T: float, cadence: int = 1,
           dt: Optional[float] = None, safety: float = 0.9,
           p_moment: float = 1.0, keep_states: bool = False):
    """Integrate the BD system, emitting the standard record columns.

    The series uses a ``c1`` column in place of ``theta`` (they differ by
    the constant z_s).  Dissipation and the Lyapunov sum are evaluated at
    record times.
    """
    from .dynamics import RunSeries

    L = state0.L
    ar, br = _rate_arrays(rates, L)
    ell = np.arange(1, L + 1, dtype=float)
    z_eq = bd_equilibrium_z(rates, state0.rho, L)
    c_eq = bd_equilibrium(rates, z_eq, L)
    g_min = bd_free_energy(BDState(c=c_eq, rho=state0.rho), rates)
    edge_lo = int(math.floor(0.95 * L))

    rows = {k: [] for k in ("t", "c1", "G", "F_rho", "D", "W_mass",
                            "Wp_moment", "edge_mass")}
    states = []

    def emit(st: BDState):
        g = bd_free_energy(st, rates)
        rows["t"].append(st.t)
        rows["c1"].append(st.c1)
        rows["G"].append(g)
        rows["F_rho"].append(g - g_min)
        rows["D"].append(bd_dissipation(st, rates))
        rows["W_mass"].append(st.mass())
        rows["Wp_moment"].append(float((ell ** p_moment) @ st.c))
        rows["edge_mass"].append(float(ell[edge_lo:] @ st.c[edge_lo:]))
        if keep_states:
            states.append(st)

    state = state0
    emit(state)
    use_cfl = dt is None
    t_end = state0.t + T
    dt_fixed = 0.0 if use_cfl else float(dt)
    while state.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        dt_now = bd_cfl_dt(rates, state, safety) if use_cfl else dt_fixed
        remaining = t_end - state.t
        k = min(cadence, max(1, int(math.ceil(remaining / dt_now - 1e-12))))
        c = state.c.copy()
        t, status, site, _, _ = K.bd_run_block(c, ar, br, k, dt_now,
                                               use_cfl, safety, state.t)
        if status == 1:
            raise StepFailure(f"positivity loss for cluster {site + 1} "
                              f"at t={t:g}", t=t)
        state = replace(state, c=c, t=t)
        drift = abs(state.mass() - state.rho)
        if drift > 1e-10 * max(1.0, abs(state.rho)):
            raise MassDrift(f"mass drift {drift:.3e} at t={t:g}")
        emit(state)

    arrays = {k: np.asarray(v) for k, v in rows.items()}
    return RunSeries(t=arrays["t"], theta=arrays["c1"], G=arrays["G"],
                     F_rho=arrays["F_rho"], D=arrays["D"],
                     W_mass=arrays["W_mass"], Wp_moment=arrays["Wp_moment"],
                     edge_mass=arrays["edge_mass"], p_moment=p_moment,
                     final_state=state,
                     states=states if keep_states else None,
                     theta_column="c1")
