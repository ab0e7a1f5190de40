"""Crank-Nicolson / IMEX time stepping of the Ginzburg-Landau problem.

Interior nodes carry ``u_t = A Lap_h u + gamma u + P(u) + f`` with
``A = lambda + i alpha`` and ``P(u) = -(kappa + i beta)|u|^(p-1) u``; the
linear part is implicit (CN), P is explicit (AB2 or one Picard update).

Boundary treatments at Gamma1 (node M):

* ``dynamic``: the trace obeys its own ODE. With ``phi`` the feedback
  profile, order 2 balances the half cell ``[r_{M-1/2}, r1]``::

      (phi + h/(2A)) u_t = -s D1 u + (h/(2A)) (gamma u + P + f) + f + g_b

  where ``s D1 u`` is the last face flux divided by ``r1^(N-1)``. Order 1
  drops the half-cell terms. Both rows make the linear operator exactly
  dissipative in the discrete V-inner product.
* ``wentzell``: an algebraic row at the new time level::

      D_nu u + phi (A Lap_b u + gamma u + P + f) = f + g_b

Forced problems follow ``u_t - A Lap u = F(u) + f`` in the interior with the
boundary input entering as ``du/dnu = -u_t + f + g_b`` (dynamic form), which is
``du/dnu = -A Lap u - F(u) + g_b`` in Wentzell form.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import discrete_ops as ops
from .diagnostics import EnergyLedger
from .errors import Blowup, InvalidRadii, NonConvergence
from .geometry import build_grid
from .linsolve import PreparedSolver, TridiagonalSystem
from .model import compatibility_residual, feedback_invert, identity_feedback, power_term

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class Forcing:
    """Interior source ``f(r, t)`` and boundary input ``g_b(t)``; either may be None."""

    f: object = None
    g_b: object = None

    def interior(self, r, t):
        if self.f is None:
            return None
        return np.asarray(self.f(r, t), dtype=complex) * np.ones_like(r, dtype=complex)

    def boundary(self, t):
        return 0.0j if self.g_b is None else complex(self.g_b(t))


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    T: float
    bc_variant: str = "dynamic"
    boundary_order: int = 2
    nonlinear_treatment: str = "ab2"
    feedback: object = field(default_factory=identity_feedback)
    forcing: Forcing = None
    fp_tol: float = 1e-10
    fp_maxiter: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"T must be >= dt, got T={self.T}, dt={self.dt}")
        if self.bc_variant not in ("dynamic", "wentzell"):
            raise ValueError(f"unknown bc_variant {self.bc_variant!r}")
        if self.boundary_order not in (1, 2):
            raise ValueError(f"boundary_order must be 1 or 2, got {self.boundary_order}")
        if self.nonlinear_treatment not in ("ab2", "picard1"):
            raise ValueError(f"unknown nonlinear_treatment {self.nonlinear_treatment!r}")

    @property
    def nsteps(self):
        return int(round(self.T / self.dt))

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return SchemeConfig(**kw)


def interior_operator(grid, params):
    """Tridiagonal ``A Lap_h + gamma I`` on rows 1..M-1 (rows 0, M zero)."""
    n = grid.size
    h = grid.h
    face = ops.face_radii_power(grid)
    node = grid.nodes[1:-1] ** (grid.N - 1)
    a = face[:-1] / (node * h * h)
    b = face[1:] / (node * h * h)
    A = params.A
    lower = np.zeros(n - 1, dtype=complex)
    diag = np.zeros(n, dtype=complex)
    upper = np.zeros(n - 1, dtype=complex)
    lower[:-1] = A * a
    diag[1:-1] = -A * (a + b) + params.gamma
    upper[1:] = A * b
    return TridiagonalSystem(lower, diag, upper)


class StepOperator:
    """Assembled CN matrices for one (grid, params, scheme) triple."""

    def __init__(self, grid, params, scheme):
        if params.N != grid.N:
            raise ValueError(f"params.N={params.N} does not match grid.N={grid.N}")
        self.grid = grid
        self.params = params
        self.scheme = scheme
        self.L = interior_operator(grid, params)
        self.s = ops.boundary_flux_ratio(grid)
        self.half = grid.h / (2.0 * params.A) if scheme.boundary_order == 2 else 0.0
        self.solver = None
        if scheme.feedback.is_identity:
            self.left, self.extra = self.assemble(1.0)
            self.right = self._right_matrix(1.0)
            self.solver = PreparedSolver(self.left, self.extra)

    # -- boundary rows -------------------------------------------------------

    def dynamic_row(self, phi):
        """(coeff on u_{M-1}, coeff on u_M, scale of explicit terms) of u_M'."""
        h = self.grid.h
        if self.scheme.boundary_order == 2:
            c = 1.0 / (phi + self.half)
            return c * self.s / h, c * (-self.s / h + self.half * self.params.gamma), c
        return 1.0 / (phi * h), -1.0 / (phi * h), 1.0 / phi

    def wentzell_row(self, phi):
        """Coefficients on (u_{M-3}, ..., u_M) of the Wentzell row."""
        grid = self.grid
        h = grid.h
        if self.scheme.boundary_order == 2:
            dnu = np.array([0.0, 1.0, -4.0, 3.0]) / (2.0 * h)
            lap = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2 + (grid.N - 1) / grid.r1 * dnu
        else:
            face = grid.midpoints[-2:] ** (grid.N - 1)
            node = grid.nodes[-2] ** (grid.N - 1) * h * h
            lap = np.array([0.0, face[0], -(face[0] + face[1]), face[1]]) / node
            dnu = np.array([0.0, 0.0, -1.0, 1.0]) / h
        row = dnu + phi * self.params.A * lap
        row[3] += phi * self.params.gamma
        return row

    def assemble(self, phi):
        dt = self.scheme.dt
        n = self.grid.size
        L = self.L
        lower = -0.5 * dt * L.lower
        diag = 1.0 - 0.5 * dt * L.diag
        upper = -0.5 * dt * L.upper
        diag[0] = 1.0
        upper[0] = 0.0
        extra = None
        if self.scheme.bc_variant == "dynamic":
            cm1, cm, _ = self.dynamic_row(phi)
            lower[-1] = -0.5 * dt * cm1
            diag[-1] = 1.0 - 0.5 * dt * cm
        else:
            row = self.wentzell_row(phi)
            lower[-1] = row[2]
            diag[-1] = row[3]
            extra = [(n - 1, n - 4, row[0]), (n - 1, n - 3, row[1])]
        return TridiagonalSystem(lower, diag, upper), extra

    def _right_matrix(self, phi):
        dt = self.scheme.dt
        L = self.L
        lower = 0.5 * dt * L.lower
        diag = 1.0 + 0.5 * dt * L.diag
        upper = 0.5 * dt * L.upper
        diag[0] = 0.0
        upper[0] = 0.0
        if self.scheme.bc_variant == "dynamic":
            cm1, cm, _ = self.dynamic_row(phi)
            lower[-1] = 0.5 * dt * cm1
            diag[-1] = 1.0 + 0.5 * dt * cm
        else:
            lower[-1] = 0.0
            diag[-1] = 0.0
        return TridiagonalSystem(lower, diag, upper)

    # -- one step ------------------------------------------------------------

    def rhs(self, u, phi, P_mid, P_new, t, right=None):
        """Right-hand side of the CN system for a given boundary profile value."""
        dt = self.scheme.dt
        grid = self.grid
        forcing = self.scheme.forcing or Forcing()
        right = right if right is not None else self._right_matrix(phi)
        b = right.matvec(u)
        tm = t + 0.5 * dt
        f_mid = forcing.interior(grid.nodes, tm)
        expl = P_mid.copy()
        if f_mid is not None:
            expl = expl + f_mid
        b[1:-1] += dt * expl[1:-1]
        b[0] = 0.0
        if self.scheme.bc_variant == "dynamic":
            _, _, c = self.dynamic_row(phi)
            fM = 0.0 if f_mid is None else f_mid[-1]
            b[-1] += dt * c * (self.half * (P_mid[-1] + fM) + fM + forcing.boundary(tm))
        else:
            t1 = t + dt
            f_new = forcing.interior(grid.nodes[-1:], t1)
            fM = 0.0 if f_new is None else f_new[0]
            b[-1] = fM + forcing.boundary(t1) - phi * (P_new[-1] + fM)
        return b


def assemble_step_operator(grid, params, scheme):
    return StepOperator(grid, params, scheme)


def _explicit_terms(u, u_prev, params, treatment):
    """Nonlinear term at the half step and at the new level (AB2 extrapolation)."""
    Pn = power_term(u, params)
    if u_prev is None or treatment != "ab2":
        return Pn, Pn
    Pp = power_term(u_prev, params)
    return 1.5 * Pn - 0.5 * Pp, 2.0 * Pn - Pp


def _solve_linear_stage(u, op, t, P_mid, P_new):
    if op.solver is not None:
        return op.solver.solve(op.rhs(u, 1.0, P_mid, P_new, t, op.right))
    return _solve_feedback_stage(u, op, t, P_mid, P_new)


def _boundary_rate(u_new, u, op, P_new, t):
    """Boundary u_t implied by a candidate new state (argument of g)."""
    if op.scheme.bc_variant == "dynamic":
        return (u_new[-1] - u[-1]) / op.scheme.dt
    grid = op.grid
    lap = ops.wentzell_laplacian(u_new, grid, op.scheme.boundary_order)
    forcing = op.scheme.forcing or Forcing()
    f_new = forcing.interior(grid.nodes[-1:], t + op.scheme.dt)
    fM = 0.0 if f_new is None else f_new[0]
    return op.params.A * lap + op.params.gamma * u_new[-1] + P_new[-1] + fM


def _solve_feedback_stage(u, op, t, P_mid, P_new):
    """Outer fixed point on phi(|u_t|) for a nonlinear feedback law."""
    spec = op.scheme.feedback
    grid = op.grid
    dnu = ops.normal_derivative(u, grid, ops.GAMMA1, op.scheme.boundary_order)
    s = abs(feedback_invert(-dnu, spec))
    for _ in range(op.scheme.fp_maxiter):
        phi = float(spec.profile(s))
        left, extra = op.assemble(phi)
        u_new = PreparedSolver(left, extra).solve(op.rhs(u, phi, P_mid, P_new, t))
        s_new = abs(_boundary_rate(u_new, u, op, P_new, t))
        if abs(s_new - s) <= op.scheme.fp_tol * (1.0 + s_new):
            return u_new
        s = s_new
    raise NonConvergence(f"boundary feedback fixed point did not converge at t={t:.6g}")


def step(u, op, t, u_prev=None):
    """Advance ``u`` from ``t`` to ``t + dt``.

    ``u_prev`` is the state at ``t - dt``; without it the AB2 extrapolation
    starts with one explicit Euler evaluation of the nonlinearity.
    """
    u = np.asarray(u, dtype=complex)
    params = op.params
    treatment = op.scheme.nonlinear_treatment
    P_mid, P_new = _explicit_terms(u, u_prev, params, treatment)
    u_new = _solve_linear_stage(u, op, t, P_mid, P_new)
    if treatment == "picard1" and not params.is_linear:
        P_new = power_term(u_new, params)
        P_mid = power_term(0.5 * (u + u_new), params)
        u_new = _solve_linear_stage(u, op, t, P_mid, P_new)
    u_new[0] = 0.0
    return u_new


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    ut_trace: list = field(default_factory=list)
    dnu_trace: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def final(self):
        return self.fields[-1]


def _forcing_norms(op, t):
    """(||g_b||^2 on Gamma1, ||f||_V^2) at time t, for the forced estimate."""
    forcing = op.scheme.forcing
    if forcing is None:
        return 0.0, 0.0
    grid = op.grid
    g_sq = grid.surface_measure_G1 * abs(forcing.boundary(t)) ** 2
    f = forcing.interior(grid.nodes, t)
    f_sq = 0.0 if f is None else ops.norm_v(f, grid) ** 2
    return g_sq, f_sq


def suggested_dt(grid, params, amplitude):
    """dt <= min(0.5 h, 0.1 / max|F'|) for fields bounded by ``amplitude``."""
    slope = abs(params.gamma) + params.p * abs(params.nonlinear_coeff) * amplitude ** (params.p - 1)
    return min(0.5 * grid.h, 0.1 / slope) if slope > 0 else 0.5 * grid.h


def compatibility_tolerance(u, grid):
    """Residual level below which data always counts as compatible.

    A genuine violation is O(|u| / L); smooth compatible data leaves an
    O(h^2) stencil residual, which the sqrt(h / L) |u| / L cut admits on
    any grid worth running unless the data has steep high derivatives.
    """
    L = grid.r1 - grid.r0
    return math.sqrt(grid.h / L) * max(float(np.max(np.abs(u))), 1e-300) / L


def incompatible_data(u, grid, params, g_b=0.0):
    """``(flag, residual)`` for the compatibility condition at Gamma1.

    Residuals above :func:`compatibility_tolerance` are re-measured on the
    grid with every other node; a residual that shrinks at least twofold
    under refinement is discretization error, not incompatibility.
    """
    cc = compatibility_residual(u, grid, params, g_b)
    if cc <= compatibility_tolerance(u, grid):
        return False, cc
    if grid.M % 2 == 0 and grid.M >= 16:
        coarse = build_grid(grid.N, grid.r0, grid.r1, grid.M // 2)
        if compatibility_residual(np.asarray(u)[::2], coarse, params, g_b) >= 2.0 * cc:
            return False, cc
    return True, cc


def run(grid, params, scheme, u0, sample_stride=1, callback=None):
    """Integrate to ``scheme.T``; return the sampled trajectory and the ledger.

    Samples are stored every ``sample_stride`` steps and at the final step;
    the ledger records every step. Raises Blowup when a norm exceeds 1e12.
    """
    u = np.array(u0, dtype=complex)
    if u.shape != (grid.size,):
        raise ValueError(f"initial field has shape {u.shape}, grid needs ({grid.size},)")
    if u[0] != 0:
        raise ValueError("initial field must vanish on Gamma0 (node 0)")
    forcing = scheme.forcing or Forcing()
    bad, cc = incompatible_data(u, grid, params, forcing.boundary(0.0))
    if bad:
        log.warning("initial data violates the compatibility condition (residual %.3g)", cc)
    op = StepOperator(grid, params, scheme)
    order = scheme.boundary_order
    ledger = EnergyLedger(grid, params)
    traj = Trajectory()
    ledger.record(0.0, u)
    traj.times.append(0.0)
    traj.fields.append(u.copy())
    traj.steps.append(0)
    nsteps = scheme.nsteps
    dt = scheme.dt
    u_prev = None
    for n in range(nsteps):
        t = n * dt
        u_new = step(u, op, t, u_prev)
        t_new = (n + 1) * dt
        ut = (u_new[-1] - u[-1]) / dt
        dnu_mid = ops.normal_derivative(0.5 * (u + u_new), grid, ops.GAMMA1, order)
        g_sq, f_sq = _forcing_norms(op, t + 0.5 * dt)
        ledger.record(t_new, u_new, u_prev=u, ut_bd=ut, dnu_mid=dnu_mid, g_sq=g_sq, f_sq=f_sq)
        traj.ut_trace.append(ut)
        traj.dnu_trace.append(ops.normal_derivative(u_new, grid, ops.GAMMA1, order))
        vn = ledger.V_norm[-1]
        lp = ledger.Lp1_interior[-1] ** (1.0 / (params.p + 1))
        if not (np.isfinite(vn) and np.isfinite(lp)) or max(vn, lp) > BLOWUP_LIMIT:
            raise Blowup(f"norm exceeded {BLOWUP_LIMIT:g} at t={t_new:.6g}")
        u_prev, u = u, u_new
        if (n + 1) % sample_stride == 0 or n + 1 == nsteps:
            traj.times.append(t_new)
            traj.fields.append(u.copy())
            traj.steps.append(n + 1)
        if callback is not None:
            callback(n + 1, t_new, u)
    return traj, ledger


def neumann_map(g_val, grid):
    """Harmonic radial lift with value 0 on Gamma0 and normal derivative g on Gamma1."""
    r = grid.nodes
    g = complex(g_val)
    if grid.N >= 2 and grid.r0 == 0:
        raise InvalidRadii("the Neumann map needs r0 > 0 when N >= 2")
    if grid.N == 1:
        out = g * (r - grid.r0)
    elif grid.N == 2:
        out = g * grid.r1 * np.log(r / grid.r0)
    else:
        out = g * grid.r1**2 * (1.0 / grid.r0 - 1.0 / r)
    return np.asarray(out, dtype=complex)
