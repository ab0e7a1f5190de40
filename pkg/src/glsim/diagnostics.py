"""Energy bookkeeping, bound checks and rate/order fitting."""

from dataclasses import dataclass, field

import numpy as np

from . import discrete_ops as ops
from .errors import InsufficientData

LOG_FLOOR = 1e-12

CSV_COLUMNS = ("t", "V_norm", "F", "E", "L2_interior", "Lp1_interior", "bd_L2",
               "bd_Lp1", "cum_ut_bd", "cum_lap", "cum_L2p", "cum_flux")


def energy_F(u, grid, params):
    """(alpha/2) ||grad u||^2 + beta/(p+1) ||u||_{p+1}^{p+1}."""
    u = ops.as_field(u, grid)
    p = params.p
    return (0.5 * params.alpha * ops.norm_v(u, grid) ** 2
            + params.beta / (p + 1) * ops.lp_power_interior(u, grid, p + 1))


@dataclass
class EnergyLedger:
    """Per-step energy terms of one run.

    Instantaneous columns: ``V_norm`` (||u||_V), ``L2_interior`` (||u||_2),
    ``Lp1_interior`` (||u||_{p+1}^{p+1}), ``bd_L2`` (||u||^2 on Gamma1),
    ``bd_Lp1`` (||u||^{p+1} on Gamma1). Cumulative columns integrate
    ||u_t||^2 on Gamma1, ||Lap u||^2, ||u||_{2p}^{2p} and ||d_nu u||^2 on
    Gamma1 (the hidden-regularity trace) from 0 to t. ``cum_g`` and
    ``cum_f`` accumulate ||g_b||^2_{Gamma1} and ||f||_V^2 for forced runs.
    """

    grid: object
    params: object
    t: list = field(default_factory=list)
    V_norm: list = field(default_factory=list)
    L2_interior: list = field(default_factory=list)
    Lp1_interior: list = field(default_factory=list)
    bd_L2: list = field(default_factory=list)
    bd_Lp1: list = field(default_factory=list)
    cum_ut_bd: list = field(default_factory=list)
    cum_lap: list = field(default_factory=list)
    cum_L2p: list = field(default_factory=list)
    cum_flux: list = field(default_factory=list)
    cum_g: list = field(default_factory=list)
    cum_f: list = field(default_factory=list)
    def record(self, t, u, u_prev=None, ut_bd=None, dnu_mid=None, g_sq=0.0, f_sq=0.0):
        """Append the state ``u`` at time ``t``.

        Cumulative integrals advance by ``dt`` times the integrand evaluated
        at the step average ``(u_prev + u)/2``. That is the state the
        Crank-Nicolson update balances, so for the linear problem the
        ledger closes to discretization error instead of being swamped by
        trapezoid sampling of fast initial transients. ``ut_bd`` is the
        backward difference of the boundary value (already a half-step
        quantity), ``dnu_mid`` the normal derivative of the average, and
        ``g_sq``, ``f_sq`` the squared forcing norms at the half step.
        """
        grid, params = self.grid, self.params
        p = params.p
        meas = grid.surface_measure_G1
        if not self.t:
            if u_prev is not None:
                raise ValueError("the first record is the initial state; u_prev must be None")
            cums = (0.0,) * 6
        else:
            if u_prev is None:
                raise ValueError("u_prev is required after the initial record")
            dt = t - self.t[-1]
            mid = 0.5 * (np.asarray(u, dtype=complex) + u_prev)
            if dnu_mid is None:
                dnu_mid = ops.normal_derivative(mid, grid, ops.GAMMA1, 2)
            ut_sq = meas * abs(ut_bd) ** 2 if ut_bd is not None else 0.0
            rates = (ut_sq,
                     ops.weighted_l2_sq(ops.laplacian_apply(mid, grid), grid),
                     ops.lp_power_interior(mid, grid, 2 * p),
                     meas * abs(dnu_mid) ** 2,
                     g_sq,
                     f_sq)
            names = ("cum_ut_bd", "cum_lap", "cum_L2p", "cum_flux", "cum_g", "cum_f")
            cums = tuple(getattr(self, n)[-1] + dt * r for n, r in zip(names, rates))
        self.t.append(float(t))
        self.V_norm.append(ops.norm_v(u, grid))
        self.L2_interior.append(ops.norm_lp_interior(u, grid, 2))
        self.Lp1_interior.append(ops.lp_power_interior(u, grid, p + 1))
        self.bd_L2.append(meas * abs(u[-1]) ** 2)
        self.bd_Lp1.append(meas * abs(u[-1]) ** (p + 1))
        for name, value in zip(("cum_ut_bd", "cum_lap", "cum_L2p", "cum_flux", "cum_g", "cum_f"), cums):
            getattr(self, name).append(float(value))

    def array(self, name):
        return np.asarray(getattr(self, name), dtype=float)

    @property
    def F(self):
        p = self.params.p
        return (0.5 * self.params.alpha * self.array("V_norm") ** 2
                + self.params.beta / (p + 1) * self.array("Lp1_interior"))

    @property
    def E(self):
        return energy_E(self, self.params)

    def columns(self):
        data = {name: self.array(name) for name in CSV_COLUMNS if name not in ("F", "E")}
        data["F"] = self.F
        data["E"] = self.E
        return data

    def __len__(self):
        return len(self.t)


def energy_E(ledger, params, gamma_sign=None):
    """Energy functional including the cumulative dissipation integrals.

    For ``gamma <= 0`` the boundary term ``-(alpha gamma / 2) ||u||^2_{Gamma1}``
    is included; for ``gamma > 0`` it is omitted. ``gamma_sign`` overrides
    the sign taken from ``params``.
    """
    a, b, k, lam, p = params.alpha, params.beta, params.kappa, params.lam, params.p
    sign = np.sign(params.gamma) if gamma_sign is None else np.sign(gamma_sign)
    E = (0.5 * a * ledger.array("V_norm") ** 2
         + b / (p + 1) * ledger.array("Lp1_interior")
         + (a * k + b * lam) / (p + 1) * ledger.array("bd_Lp1")
         + a * ledger.array("cum_ut_bd")
         + a * lam * ledger.array("cum_lap")
         + k * b * ledger.array("cum_L2p"))
    if sign <= 0:
        E = E - 0.5 * a * params.gamma * ledger.array("bd_L2")
    return E


def initial_energy_bound(u0, grid, params):
    """E_0 of the gamma < 0 decay bound: every instantaneous term at t = 0."""
    u0 = ops.as_field(u0, grid)
    a, b, k, lam, p = params.alpha, params.beta, params.kappa, params.lam, params.p
    meas = grid.surface_measure_G1
    return (0.5 * a * ops.norm_v(u0, grid) ** 2
            + b / (p + 1) * ops.lp_power_interior(u0, grid, p + 1)
            - 0.5 * a * params.gamma * meas * abs(u0[-1]) ** 2
            + (a * k + b * lam) / (p + 1) * meas * abs(u0[-1]) ** (p + 1))


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    n_used: int


def decay_rate_fit(times, values, floor=LOG_FLOOR, min_samples=10):
    """Least-squares fit of ``ln value = intercept - rate * t``.

    Samples at or below ``floor`` are dropped.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > floor
    if keep.sum() < min_samples:
        raise InsufficientData(f"only {int(keep.sum())} samples above {floor}")
    t, y = t[keep], np.log(v[keep])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, len(y)) else 1.0 - np.sum(resid**2) / ss_tot
    return DecayFit(float(-slope), float(intercept), float(r2), int(keep.sum()))


@dataclass(frozen=True)
class BoundCheck:
    max_relative_violation: float
    worst_time: float


def bound_check(times, values, bound, floor=LOG_FLOOR):
    """Largest ``(value - bound(t)) / max(bound(t), floor)`` over the samples."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("times and values must have the same length")
    b = np.asarray(bound(t), dtype=float) * np.ones_like(t)
    rel = (v - b) / np.maximum(b, floor)
    i = int(np.argmax(rel))
    return BoundCheck(float(rel[i]), float(t[i]))


def convergence_order(h_list, error_list):
    """Least-squares slope of ln(error) against ln(h)."""
    h = np.asarray(h_list, dtype=float)
    e = np.asarray(error_list, dtype=float)
    if len(h) < 3 or len(h) != len(e):
        raise InsufficientData("need at least 3 (h, error) pairs")
    if np.any(e <= 0) or np.any(h <= 0):
        raise InsufficientData("errors and mesh sizes must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
