"""Verification studies: each one runs the solver and turns a qualitative
statement about the equation into numbers, thresholds and pass flags."""

import inspect
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import discrete_ops as ops
from .diagnostics import bound_check, convergence_order, decay_rate_fit, initial_energy_bound
from .errors import Blowup, InsufficientData, ValidationError
from .geometry import build_grid, geometric_condition_check
from .model import feedback_eval, identity_feedback, nonlinearity
from .stepper import Forcing, run

log = logging.getLogger(__name__)

REPORT_SCHEMA = "glsim-report-v1"

_RELATIONS = {
    "<=": lambda v, t: v <= t,
    ">=": lambda v, t: v >= t,
    "<": lambda v, t: v < t,
    ">": lambda v, t: v > t,
    "in": lambda v, t: t[0] <= v <= t[1],
    "finite": lambda v, t: True,
}


@dataclass
class Check:
    """One pass flag together with the metric and threshold that decide it."""

    metric: str
    value: object
    relation: str
    threshold: object
    passed: bool = None
    note: str = ""

    def __post_init__(self):
        if self.relation not in _RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if isinstance(self.threshold, tuple):
            self.threshold = list(self.threshold)
        if self.passed is None:
            ok = self.value is not None and bool(np.isfinite(self.value))
            self.passed = bool(ok and _RELATIONS[self.relation](self.value, self.threshold))

    def as_dict(self):
        return {"metric": self.metric, "value": self.value, "relation": self.relation,
                "threshold": self.threshold, "passed": self.passed, "note": self.note}


def _plain(obj):
    """Convert numpy scalars/arrays and complex numbers into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


@dataclass
class ExperimentReport:
    name: str
    parameters: dict = field(default_factory=dict)
    cases: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    wall_time: float = 0.0
    notes: list = field(default_factory=list)

    def add_check(self, key, metric, value, relation, threshold, note=""):
        chk = Check(metric, _plain(value), relation, _plain(threshold), note=note)
        self.checks[key] = chk
        self.tolerances[key] = chk.threshold
        return chk

    @property
    def passes(self):
        return {k: c.passed for k, c in self.checks.items()}

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {
            "schema": REPORT_SCHEMA,
            "name": self.name,
            "passed": self.passed,
            "parameters": _plain(self.parameters),
            "cases": _plain(self.cases),
            "fits": _plain(self.fits),
            "checks": {k: c.as_dict() for k, c in self.checks.items()},
            "tolerances": _plain(self.tolerances),
            "wall_time": None if self.wall_time is None else float(self.wall_time),
            "notes": list(self.notes),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data):
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"not a {REPORT_SCHEMA} document")
        checks = {}
        for key, c in data["checks"].items():
            thr = c["threshold"]
            checks[key] = Check(c["metric"], c["value"], c["relation"], thr, passed=c["passed"], note=c["note"])
        return cls(name=data["name"], parameters=data["parameters"], cases=data["cases"], fits=data["fits"],
                   checks=checks, tolerances=data["tolerances"], wall_time=data["wall_time"],
                   notes=data["notes"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- initial data -------------------------------------------------------------


def bump_initial(grid, amplitude=1.0, center=0.45, width=0.35):
    """Smooth compactly supported bump, in fractions of the radial extent.

    The support ``[center - width, center + width]`` must stay at least two
    cells away from Gamma1 (so the compatibility condition holds to
    round-off) and inside the domain.
    """
    L = grid.r1 - grid.r0
    if width <= 0:
        raise ValueError("bump width must be positive")
    if center - width < 0 or (center + width) * L > L - 2 * grid.h:
        raise ValueError("bump support must lie in the domain and end two cells before Gamma1")
    x = ((grid.nodes - grid.r0) / L - center) / width
    out = np.zeros(grid.size, dtype=complex)
    inside = np.abs(x) < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def hump_initial(grid, amplitude=1.0, power=3):
    """``a (4 xi (1 - xi))^q`` with ``xi = (r - r0)/L``; peak value ``a``.

    For ``q >= 3`` the value, slope and curvature vanish at both ends, so the
    data is compatible at Gamma1 for every choice of coefficients and the
    Dirichlet end needs no corner layer either.
    """
    xi = (grid.nodes - grid.r0) / (grid.r1 - grid.r0)
    return (amplitude * (4.0 * xi * (1.0 - xi)) ** power).astype(complex)


def mode_initial(grid, k=1, amplitude=1.0):
    """``a sin(k pi (r - r0) / L)``: vanishes at both ends of the interval."""
    L = grid.r1 - grid.r0
    return amplitude * np.sin(k * np.pi * (grid.nodes - grid.r0) / L).astype(complex)


def random_compatible(grid, params, seed, modes=6, scale=1.0):
    """Seeded smooth field obeying the linear (kappa = beta = gamma = 0) compatibility row."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, modes + 1)
    coeffs = scale * (rng.standard_normal(modes) + 1j * rng.standard_normal(modes)) / k**2
    return ops.smooth_constrained_field(grid, params, coeffs)


def _initial(u0, grid, params):
    """Initial field from an array, a callable of the grid, or None (the default bump).

    Callables that take a parameter named ``params`` also receive the model.
    """
    if u0 is None:
        return bump_initial(grid)
    if callable(u0):
        return np.asarray(u0(grid, params) if _wants_params(u0) else u0(grid), dtype=complex)
    return np.asarray(u0, dtype=complex)


def _wants_params(fn):
    try:
        return "params" in inspect.signature(fn).parameters
    except (TypeError, ValueError):
        return False


def _map(fn, tasks, max_workers):
    """Run independent cases, optionally in worker processes; order is kept."""
    if max_workers and max_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _levels(grid, scheme, levels):
    """Jointly refined (grid, scheme) pairs: h and dt both halve per level."""
    out = []
    for k in range(levels):
        g = build_grid(grid.N, grid.r0, grid.r1, grid.M * 2**k)
        out.append((g, scheme.replace(dt=scheme.dt / 2**k)))
    return out


def _grid_dict(grid):
    return {"N": grid.N, "r0": grid.r0, "r1": grid.r1, "M": grid.M}


def _params_dict(params):
    return {"lambda": params.lam, "alpha": params.alpha, "kappa": params.kappa, "beta": params.beta,
            "gamma": params.gamma, "p": params.p}


def _scheme_dict(scheme):
    return {"dt": scheme.dt, "T": scheme.T, "bc_variant": scheme.bc_variant,
            "boundary_order": scheme.boundary_order, "nonlinear_treatment": scheme.nonlinear_treatment}


def _base_parameters(grid, params, scheme):
    return {"domain": _grid_dict(grid), "params": _params_dict(params), "scheme": _scheme_dict(scheme)}


# -- linear suite ---------------------------------------------------------------


def default_linear_forcing(grid, amplitude=1.0):
    """Smooth interior source plus boundary input; g_b(0) = 0."""
    L = grid.r1 - grid.r0

    def f(r, t):
        xi = (np.asarray(r) - grid.r0) / L
        return amplitude * (1.0 + 0.5j) * np.sin(np.pi * xi / 2) * np.cos(2.0 * t)

    def g_b(t):
        return amplitude * (0.5 - 0.25j) * np.sin(3.0 * t)

    return Forcing(f=f, g_b=g_b)


def gronwall_terms(ledger, u0, grid, params):
    """Left and right sides of the eta = 1/2 forced energy inequality over time."""
    V = ledger.array("V_norm")
    lhs = 0.25 * V**2 + params.lam * ledger.array("cum_lap") + 0.5 * ledger.array("cum_flux")
    rhs = 0.5 * ops.norm_v(u0, grid) ** 2 + 0.5 * ledger.array("cum_g") + ledger.array("cum_f")
    return lhs, rhs


def linear_suite(grid, params, scheme, u0=None, forcing=None, T_long=(4.0, 8.0), forced_T=None):
    """Contraction, hidden trace regularity and the forced energy inequality.

    ``T_long`` are the two horizons of the decaying run used for the trace
    integral; the forced run uses ``u0 = 0`` and ``forcing`` (a default
    source is built when omitted) up to ``forced_T`` (default ``min(T, 1)``).
    """
    if not params.is_linear or params.gamma != 0:
        raise ValidationError([("params", "linear_suite needs kappa = beta = gamma = 0")])
    start = time.perf_counter()
    rep = ExperimentReport("linear", _base_parameters(grid, params, scheme))
    scheme = scheme.replace(feedback=identity_feedback(), forcing=None)
    u_init = _initial(u0, grid, params)

    # (a) contraction
    _, ledger = run(grid, params, scheme, u_init)
    V = ledger.array("V_norm")
    V0 = V[0]
    viol = max(0.0, float(np.max(np.diff(V)))) if len(V) > 1 else 0.0
    rel = viol / V0 if V0 > 0 else 0.0
    rep.cases.append({"case": "contraction", "T": scheme.T, "V0": V0, "V_final": V[-1],
                      "max_step_increase": viol, "relative_violation": rel})
    rep.add_check("contraction", "relative_violation", rel, "<=", 1e-10)

    # (b) hidden regularity: trace integral saturates in a decaying run
    t_short, t_long = T_long
    _, led_long = run(grid, params, scheme.replace(T=t_long), u_init)
    times = led_long.array("t")
    flux = led_long.array("cum_flux")
    i_short = int(np.argmin(np.abs(times - t_short)))
    f_short, f_long = flux[i_short], flux[-1]
    change = (f_long - f_short) / f_short if f_short > 0 else 0.0
    rep.cases.append({"case": "hidden_regularity", "T_short": float(times[i_short]), "T_long": float(times[-1]),
                      "cum_flux_short": f_short, "cum_flux_long": f_long, "relative_change": change})
    rep.add_check("trace_finite", "cum_flux_long", f_long, "finite", None)
    rep.add_check("trace_stable", "relative_change", change, "<", 0.01)

    # (c) forced inequality
    forcing = forcing or default_linear_forcing(grid)
    T_forced = forced_T if forced_T is not None else min(scheme.T, 1.0)
    forced = scheme.replace(T=T_forced, forcing=forcing)
    zero = np.zeros(grid.size, dtype=complex)
    _, led_f = run(grid, params, forced, zero)
    lhs, rhs = gronwall_terms(led_f, zero, grid, params)
    live = rhs > 0
    worst = float(np.min((rhs[live] - lhs[live]) / rhs[live])) if live.any() else 0.0
    tol = grid.h + scheme.dt
    rep.cases.append({"case": "forced_inequality", "T": T_forced, "min_relative_slack": worst,
                      "lhs_final": float(lhs[-1]), "rhs_final": float(rhs[-1])})
    rep.add_check("forced_inequality", "min_relative_slack", worst, ">=", -tol, note="tolerance h + dt")
    rep.add_check("forced_nontrivial", "lhs_final", float(lhs[-1]), ">", 0.0)
    rep.wall_time = time.perf_counter() - start
    return rep


# -- stabilization ----------------------------------------------------------------


def _stab_case(task):
    grid, params, scheme, u0, gamma = task
    p = params.replace(gamma=gamma)
    traj, ledger = run(grid, p, scheme, u0)
    return gamma, ledger.array("t"), ledger.F, initial_energy_bound(u0, grid, p)


def stabilization_study(grid, params, scheme, gamma_values=(-0.5, 0.0), u0=None, window=None,
                        max_workers=None, bound_tol=0.05, min_rate_neg=None):
    """Decay of F(t) with a damping potential (gamma < 0) or by boundary feedback alone.

    For gamma < 0, F(t) is compared against E_0 e^{-|gamma| t} and its
    fitted rate against ``min_rate_neg`` (default 0.9 |gamma|). For gamma = 0
    the fit window is ``window`` (default [T/4, T]).
    """
    if not (params.beta > 0 and params.kappa > 0 and params.lam > 0):
        raise ValidationError([("params", "stabilization needs beta, kappa, lambda > 0")])
    if not params.global_range_ok():
        raise ValidationError([("params.p", f"p={params.p} outside the global range for N={params.N}")])
    if any(g > 0 for g in gamma_values):
        raise ValidationError([("gamma_values", "gamma must be <= 0")])
    start = time.perf_counter()
    rep = ExperimentReport("stabilization", _base_parameters(grid, params, scheme))
    rep.parameters["gamma_values"] = list(gamma_values)
    u_init = _initial(u0, grid, params)
    if 0.0 in gamma_values:
        geo = geometric_condition_check(grid)
        rep.parameters["geometric"] = {"holds": geo.holds, "gamma0": geo.gamma0_product,
                                       "gamma1": geo.gamma1_product, "x0": geo.x0}
        if not geo.holds:
            raise ValidationError([("domain", "geometric multiplier condition fails for this domain")])
    lo, hi = window if window is not None else (scheme.T / 4, scheme.T)
    results = _map(_stab_case, [(grid, params, scheme, u_init, g) for g in gamma_values], max_workers)
    for gamma, t, F, E0 in results:
        key = f"gamma={gamma:g}"
        case = {"case": key, "gamma": gamma, "E0": E0, "F0": float(F[0]), "F_final": float(F[-1])}
        if F[0] <= 0:
            case["degenerate"] = True
            rep.cases.append(case)
            rep.notes.append(f"{key}: zero initial energy, excluded from fits")
            continue
        if gamma < 0:
            rate_bound = abs(gamma)
            chk = bound_check(t, F, lambda s: E0 * np.exp(-rate_bound * s))
            fit = decay_rate_fit(t, F)
            case.update(max_relative_violation=chk.max_relative_violation, worst_time=chk.worst_time,
                        rate=fit.rate, r_squared=fit.r_squared)
            rep.fits[key] = {"rate": fit.rate, "intercept": fit.intercept, "r_squared": fit.r_squared}
            rep.add_check(f"{key}:bound", "max_relative_violation", chk.max_relative_violation, "<=", bound_tol)
            need = 0.9 * rate_bound if min_rate_neg is None else min_rate_neg
            rep.add_check(f"{key}:rate", "rate", fit.rate, ">=", need)
        else:
            sel = (t >= lo) & (t <= hi)
            fit = decay_rate_fit(t[sel], F[sel])
            case.update(rate=fit.rate, r_squared=fit.r_squared, window=[lo, hi])
            rep.fits[key] = {"rate": fit.rate, "intercept": fit.intercept, "r_squared": fit.r_squared,
                             "window": [lo, hi]}
            rep.add_check(f"{key}:rate", "rate", fit.rate, ">", 0.0)
            rep.add_check(f"{key}:r_squared", "r_squared", fit.r_squared, ">=", 0.99)
        rep.cases.append(case)
    rep.wall_time = time.perf_counter() - start
    return rep


# -- inviscid limit ------------------------------------------------------------------


def _inviscid_case(task):
    grid, params, scheme, u0, eps = task
    p = params.replace(lam=eps, kappa=eps)
    try:
        traj, _ = run(grid, p, scheme, u0, sample_stride=scheme.nsteps)
    except Blowup as exc:
        log.warning("inviscid case eps=%g blew up: %s", eps, exc)
        return eps, None, str(exc)
    return eps, traj.final, None


def inviscid_study(grid, params, scheme, epsilon_list=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3), u0=None,
                   max_workers=None, slope_range=(0.8, 1.2)):
    """Distance between viscous runs (lambda = kappa = eps) and the lambda = kappa = 0 run.

    The default data is :func:`hump_initial`, compatible for every eps; data
    compatible only for some eps produces boundary layers whose V-norm
    scales like sqrt(eps) and hides the first-order rate.
    """
    problems = []
    if grid.N != 2:
        problems.append(("domain.N", "the inviscid study is stated for N = 2"))
    if params.p != 3:
        problems.append(("params.p", "the inviscid study is stated for p = 3"))
    if params.beta <= 0:
        problems.append(("params.beta", "the inviscid study needs beta > 0"))
    eps = [float(e) for e in epsilon_list]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        problems.append(("epsilon_list", "must be strictly decreasing"))
    if any(e < 0 for e in eps):
        problems.append(("epsilon_list", "must be nonnegative"))
    if problems:
        raise ValidationError(problems)
    start = time.perf_counter()
    rep = ExperimentReport("inviscid", _base_parameters(grid, params, scheme))
    rep.parameters["epsilon_list"] = eps
    u_init = hump_initial(grid) if u0 is None else _initial(u0, grid, params)
    tasks = [(grid, params, scheme, u_init, e) for e in [0.0] + eps]
    results = _map(_inviscid_case, tasks, max_workers)
    _, ref, err = results[0]
    if ref is None:
        raise Blowup(f"reference run failed: {err}")
    xs, ys = [], []
    for e, u_eps, err in results[1:]:
        case = {"case": f"eps={e:g}", "epsilon": e}
        if u_eps is None:
            case["blowup"] = err
        else:
            dist = ops.norm_v(u_eps - ref, grid)
            case["distance"] = dist
            if e > 0 and dist > 0:
                xs.append(math.log(e))
                ys.append(math.log(dist))
        rep.cases.append(case)
    if len(xs) >= 2:
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = None
        rep.notes.append("fewer than two usable cases; no slope")
    rep.fits["slope"] = slope
    rep.add_check("slope", "slope", slope, "in", list(slope_range))
    rep.wall_time = time.perf_counter() - start
    return rep


# -- dynamic vs Wentzell ----------------------------------------------------------------


def _equiv_case(task):
    grid, params, scheme, u0 = task
    dyn, _ = run(grid, params, scheme.replace(bc_variant="dynamic"), u0)
    wen, _ = run(grid, params, scheme.replace(bc_variant="wentzell"), u0)
    return max(ops.norm_v(a - b, grid) for a, b in zip(dyn.fields, wen.fields))


def equivalence_study(grid, params, u0=None, scheme=None, levels=4, max_workers=None, min_order=1.0):
    """Max-in-time V distance between the two boundary formulations under joint refinement.

    ``u0`` may be an array (coarsest grid only), a callable of the grid, or
    None for the default bump; refinement needs a callable or None.
    """
    if scheme is None:
        raise ValidationError([("scheme", "a scheme is required")])
    if scheme.feedback is not None and not scheme.feedback.is_identity:
        raise ValidationError([("feedback", "the equivalence study uses identity feedback")])
    if u0 is not None and not callable(u0) and levels > 1:
        raise ValidationError([("initial", "refinement needs initial data given as a function of the grid")])
    start = time.perf_counter()
    rep = ExperimentReport("equivalence", _base_parameters(grid, params, scheme))
    rep.parameters["levels"] = levels
    tasks = [(g, params, s, _initial(u0, g, params)) for g, s in _levels(grid, scheme, levels)]
    dists = _map(_equiv_case, tasks, max_workers)
    hs = [t[0].h for t in tasks]
    for (g, _, s, _), d in zip(tasks, dists):
        rep.cases.append({"case": f"M={g.M}", "M": g.M, "h": g.h, "dt": s.dt, "distance": d})
    if max(dists) == 0.0:
        rep.notes.append("identical runs (zero distance at every level)")
        rep.fits["order"] = None
        rep.add_check("order", "max_distance", 0.0, "<=", 0.0, note="degenerate: zero data")
    else:
        order = convergence_order(hs, dists)
        rep.fits["order"] = order
        rep.add_check("order", "order", order, ">=", min_order)
    rep.wall_time = time.perf_counter() - start
    return rep


# -- manufactured solution ------------------------------------------------------------


@dataclass(frozen=True)
class SineProfile:
    """phi(r) = sin(k pi (r - r0) / (2 L)) and its first two derivatives.

    ``k = 2`` gives the half-wave sin(pi xi), which has zero curvature at
    Gamma1; odd ``k`` do not.
    """

    r0: float
    L: float
    k: float = 2.0
    amplitude: complex = 1.0

    @property
    def wavenumber(self):
        return self.k * np.pi / (2.0 * self.L)

    def __call__(self, r, deriv=0):
        q = self.wavenumber
        x = q * (np.asarray(r, dtype=float) - self.r0)
        vals = (np.sin(x), q * np.cos(x), -q * q * np.sin(x))
        return self.amplitude * vals[deriv]


def manufactured_forcing(grid, params, profile, feedback=None):
    """Interior source and boundary input making ``e^{-t} phi(r)`` exact.

    Convention: ``u_t - A Lap u = F(u) + f`` inside, ``d_nu u = -g(u_t) + f + g_b``
    at Gamma1 (with g the identity unless ``feedback`` is given).
    """
    A = params.A
    N = grid.N
    r1 = grid.r1

    def exact(r, t):
        return np.exp(-t) * profile(r)

    def lap(r):
        r = np.asarray(r, dtype=float)
        if N == 1:
            return profile(r, 2)
        return profile(r, 2) + (N - 1) / r * profile(r, 1)

    def f(r, t):
        r = np.asarray(r, dtype=float)
        u = exact(r, t)
        return -u - A * np.exp(-t) * lap(r) - nonlinearity(u, params)

    def g_b(t):
        u_t = -np.exp(-t) * profile(r1)
        g = u_t if feedback is None else feedback_eval(u_t, feedback)
        fM = f(np.array([r1]), t)[0]
        return np.exp(-t) * profile(r1, 1) + g - fM

    return Forcing(f=f, g_b=g_b), exact


def _mms_case(task):
    grid, params, scheme, profile = task
    forcing, exact = manufactured_forcing(grid, params, profile, scheme.feedback if scheme.feedback
                                          and not scheme.feedback.is_identity else None)
    u0 = exact(grid.nodes, 0.0).astype(complex)
    traj, _ = run(grid, params, scheme.replace(forcing=forcing), u0, sample_stride=scheme.nsteps)
    return ops.norm_v(traj.final - exact(grid.nodes, traj.times[-1]), grid)


def manufactured_solution_study(grid, params, scheme, levels=4, k=2.0, amplitude=1.0, max_workers=None,
                                min_order=1.8):
    """Endpoint V error against the exact solution ``e^{-t} sin(k pi xi / 2)``."""
    start = time.perf_counter()
    rep = ExperimentReport("manufactured", _base_parameters(grid, params, scheme))
    rep.parameters.update(levels=levels, profile={"family": "sine", "k": k, "amplitude": amplitude})
    profile = SineProfile(grid.r0, grid.r1 - grid.r0, k, amplitude)
    tasks = [(g, params, s, profile) for g, s in _levels(grid, scheme, levels)]
    errs = _map(_mms_case, tasks, max_workers)
    for (g, _, s, _), e in zip(tasks, errs):
        rep.cases.append({"case": f"M={g.M}", "M": g.M, "h": g.h, "dt": s.dt, "error": e})
    if amplitude == 0 or max(errs) == 0.0:
        rep.fits["order"] = None
        rep.notes.append("zero exact solution: error vanishes identically")
        rep.add_check("order", "max_error", max(errs), "<=", 0.0, note="degenerate: zero solution")
    else:
        order = convergence_order([t[0].h for t in tasks], errs)
        rep.fits["order"] = order
        rep.add_check("order", "order", order, ">=", min_order)
    rep.wall_time = time.perf_counter() - start
    return rep


# -- energy monotonicity ---------------------------------------------------------------


def _energy_case(task):
    grid, params, scheme, u0 = task
    _, ledger = run(grid, params, scheme, u0)
    E = ledger.E
    inc = float(np.max(np.diff(E))) if len(E) > 1 else 0.0
    return {"E0": float(E[0]), "E_final": float(E[-1]), "max_step_change": inc, "violation": max(0.0, inc)}


def energy_monotonicity_study(grid, params, scheme, u0=None, levels=3, max_workers=None, min_order=1.0):
    """Per-step increase of the full energy E (with its dissipation integrals) for gamma <= 0.

    The violation at a level is ``max(0, max_n (E_{n+1} - E_n))``. If it is
    zero on every level there is nothing to fit and the check passes on the
    stored maximum; otherwise its refinement order must reach ``min_order``.
    """
    if params.gamma > 0:
        raise ValidationError([("params.gamma", "energy monotonicity is stated for gamma <= 0")])
    start = time.perf_counter()
    rep = ExperimentReport("energy", _base_parameters(grid, params, scheme))
    rep.parameters["levels"] = levels
    tasks = [(g, params, s, _initial(u0, g, params)) for g, s in _levels(grid, scheme, levels)]
    results = _map(_energy_case, tasks, max_workers)
    for (g, _, s, _), res in zip(tasks, results):
        rep.cases.append({"case": f"M={g.M}", "M": g.M, "h": g.h, "dt": s.dt, **res})
    viol = [r["violation"] for r in results]
    if max(viol) == 0.0:
        rep.fits["order"] = None
        rep.notes.append("E never increased on any level")
        rep.add_check("monotone", "max_violation", 0.0, "<=", 0.0)
    else:
        try:
            order = convergence_order([t[0].h for t in tasks], viol)
        except InsufficientData:
            order = None
        rep.fits["order"] = order
        rep.add_check("order", "order", order, ">=", min_order)
    rep.wall_time = time.perf_counter() - start
    return rep


STUDIES = {
    "linear": linear_suite,
    "stabilization": stabilization_study,
    "inviscid": inviscid_study,
    "equivalence": equivalence_study,
    "manufactured": manufactured_solution_study,
    "energy": energy_monotonicity_study,
}

__all__ = [
    "Check", "ExperimentReport", "REPORT_SCHEMA", "STUDIES", "SineProfile", "bump_initial", "hump_initial",
    "mode_initial", "random_compatible", "default_linear_forcing", "gronwall_terms", "linear_suite",
    "stabilization_study", "inviscid_study", "equivalence_study", "energy_monotonicity_study",
    "manufactured_forcing", "manufactured_solution_study",
]
