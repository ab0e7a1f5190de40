"""Physical parameters, the power nonlinearity and the boundary feedback law.

The equation is

    u_t - (lambda + i alpha) Lap u + (kappa + i beta) |u|^(p-1) u - gamma u = 0

with ``u = 0`` on Gamma0 and the dynamic law ``du/dnu = -g(u_t)`` on Gamma1.
"""

import ast
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import discrete_ops as ops
from .errors import NonConvergence

# Global strong solutions exist for these (p, N) when beta > 0.
GLOBAL_P_RANGE = {1: (2.0, math.inf), 2: (2.0, 5.0), 3: (2.0, 11.0 / 3.0)}


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.0
    alpha: float = 1.0
    kappa: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    p: float = 3.0
    N: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.p < 2:
            raise ValueError(f"p must be >= 2, got {self.p}")

    @property
    def A(self):
        """Complex diffusion coefficient ``lambda + i alpha``."""
        return complex(self.lam, self.alpha)

    @property
    def nonlinear_coeff(self):
        return complex(self.kappa, self.beta)

    @property
    def is_linear(self):
        return self.kappa == 0 and self.beta == 0

    def global_range_ok(self):
        """Whether p lies in the range where global solutions are known for this N."""
        lo, hi = GLOBAL_P_RANGE[self.N]
        return lo <= self.p <= hi

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in ("lam", "alpha", "kappa", "beta", "gamma", "p", "N")}
        kw.update(changes)
        return ModelParams(**kw)


def power_term(u, params):
    """``-(kappa + i beta) |u|^(p-1) u``, the part of F treated explicitly."""
    u = np.asarray(u, dtype=complex)
    if params.is_linear:
        return np.zeros_like(u)
    return -params.nonlinear_coeff * np.abs(u) ** (params.p - 1) * u


def nonlinearity(u, params):
    """F(u) = -(kappa + i beta)|u|^(p-1) u + gamma u, nodewise."""
    out = power_term(u, params) + params.gamma * np.asarray(u, dtype=complex)
    return out if out.ndim else complex(out)


def nonlinearity_tangent(u, w, params):
    """Directional derivative of F at u along w (conjugate-linear in w).

    The factor ``|u|^(p-3) u^2`` is taken as 0 where u = 0, its limit for p > 1.
    """
    u = np.asarray(u, dtype=complex)
    w = np.asarray(w, dtype=complex)
    p = params.p
    mod = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(mod > 0, mod ** (p - 3) * u**2, 0.0)
    out = (-params.nonlinear_coeff * (0.5 * (p + 1) * mod ** (p - 1) * w
                                      + 0.5 * (p - 1) * cross * np.conj(w))
           + params.gamma * w)
    return out if out.ndim else complex(out)


# -- boundary feedback ------------------------------------------------------

_SAFE_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "tanh": np.tanh,
               "abs": np.abs, "atan": np.arctan, "sin": np.sin, "cos": np.cos}
_SAFE_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name,
               ast.Load, ast.Call, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
               ast.USub, ast.UAdd)


def compile_profile(expr):
    """Turn an expression in ``s`` such as ``"1 + 1/(1+s)"`` into a callable."""
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _SAFE_NODES):
            raise ValueError(f"unsupported syntax in profile {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _SAFE_FUNCS and node.id != "s":
            raise ValueError(f"unknown name {node.id!r} in profile {expr!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ValueError(f"unsupported call in profile {expr!r}")
    code = compile(tree, "<profile>", "eval")

    def phi(s):
        return eval(code, {"__builtins__": {}}, {**_SAFE_FUNCS, "s": s})

    phi.expr = expr
    return phi


def _one(s):
    return np.ones_like(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class FeedbackSpec:
    """Radial feedback ``g(z) = phi(|z|) z`` with real profile ``phi``.

    ``m`` and ``M`` are the claimed lower/upper bounds of ``phi``; they also
    bracket the modulus solve in :func:`feedback_invert`.
    """

    family: str = "identity"
    m: float = 1.0
    M: float = 1.0
    phi: object = field(default=_one, compare=False, repr=False)
    expr: str = ""

    @property
    def is_identity(self):
        return self.family == "identity"

    def profile(self, s):
        return np.asarray(self.phi(np.asarray(s, dtype=float)), dtype=float) * _one(s)


def identity_feedback():
    return FeedbackSpec()


def saturating_feedback(m=1.0, M=2.0):
    """``phi(s) = m + (M - m)/(1 + s)``, decreasing from M to m."""
    if not 0 < m <= M:
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")

    def phi(s):
        return m + (M - m) / (1.0 + s)

    return FeedbackSpec("saturating", float(m), float(M), phi)


def custom_feedback(phi, m, M):
    """Feedback from a user profile (callable or expression in ``s``)."""
    expr = ""
    if isinstance(phi, str):
        expr = phi
        phi = compile_profile(phi)
    return FeedbackSpec("custom", float(m), float(M), phi, expr)


def feedback_eval(z, spec):
    z = np.asarray(z, dtype=complex)
    out = spec.profile(np.abs(z)) * z
    return out if out.ndim else complex(out)


def _invert_one(y, spec):
    target = abs(y)
    if target == 0.0:
        return 0.0j
    if spec.is_identity:
        return complex(y)

    def f(s):
        return float(spec.profile(s)) * s - target

    lo = target / spec.M
    hi = target / spec.m
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        s = lo
    elif fhi == 0.0:
        s = hi
    else:
        if flo * fhi > 0:
            # bounds were not honest; widen once before giving up
            lo, hi = 0.0, 2.0 * hi + 1.0
            if f(lo) * f(hi) > 0:
                raise NonConvergence(f"cannot bracket |g^-1({y})|")
        try:
            s = brentq(f, lo, hi, xtol=1e-15 * target, rtol=4 * np.finfo(float).eps, maxiter=100)
        except RuntimeError as exc:
            raise NonConvergence(str(exc)) from None
    return complex(y) * (s / target)


def feedback_invert(y, spec):
    """z with g(z) = y: solve ``phi(s) s = |y|`` then restore the phase of y."""
    y = np.asarray(y, dtype=complex)
    if y.ndim == 0:
        return _invert_one(complex(y), spec)
    return np.array([_invert_one(v, spec) for v in y.ravel()]).reshape(y.shape)


@dataclass(frozen=True)
class AssumptionReport:
    m_est: float
    M_est: float
    imag_max: float
    m_inv_est: float
    M_inv_est: float
    imag_inv_max: float
    inverse_ok: bool
    passed: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _sample_points(rng, n):
    mod = np.concatenate([rng.uniform(0.0, 5.0, n - n // 2),
                          10.0 ** rng.uniform(-3.0, 3.0, n // 2)])
    return mod * np.exp(2j * np.pi * rng.uniform(size=n))


def _estimate(func, rng, samples):
    z = _sample_points(rng, samples)
    # far pairs probe global monotonicity, near pairs the local slope
    near = samples - samples // 2
    jitter = 1.0 + 1e-4 * np.exp(2j * np.pi * rng.uniform(size=near))
    v = np.concatenate([_sample_points(rng, samples // 2), z[:near] * jitter])
    gz = func(z)
    gv = func(v)
    dz = z - v
    keep = np.abs(dz) > 0
    m_est = float(np.min(np.real((gz - gv)[keep] * np.conj(dz[keep])) / np.abs(dz[keep]) ** 2))
    nz = np.abs(z) > 0
    M_est = float(np.max(np.abs(gz[nz]) / np.abs(z[nz])))
    imag = float(np.max(np.abs(np.imag(gz[nz] * np.conj(z[nz]))) / np.abs(z[nz]) ** 2))
    return m_est, M_est, imag


def assumption_check(spec, samples=1000, seed=0):
    """Sampled estimates of the monotonicity/growth constants of g and g^-1.

    Never raises: a failing inverse is reported through ``inverse_ok``.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    m_est, M_est, imag = _estimate(lambda z: feedback_eval(z, spec), rng, samples)
    try:
        m_inv, M_inv, imag_inv = _estimate(lambda y: feedback_invert(y, spec), rng, samples)
        inverse_ok = bool(np.isfinite(m_inv) and np.isfinite(M_inv))
    except (NonConvergence, FloatingPointError, ValueError):
        m_inv, M_inv, imag_inv, inverse_ok = -math.inf, math.inf, math.inf, False
    passed = (m_est > 0 and np.isfinite(M_est) and imag <= 1e-14
              and inverse_ok and m_inv > 0 and np.isfinite(M_inv) and imag_inv <= 1e-14)
    return AssumptionReport(m_est, M_est, imag, m_inv, M_inv, imag_inv, inverse_ok, bool(passed))


def compatibility_residual(u0, grid, params, g_b=0.0):
    """``|d_nu u0 + (lambda + i alpha) Lap u0 + F(u0) - g_b|`` at Gamma1.

    This is the boundary law ``d_nu u = -u_t`` at t = 0 with u_t taken from
    the interior equation; ``g_b`` is the boundary input at t = 0 for forced
    runs. One-sided second-order stencils are used, so smooth compatible
    data leaves an O(h^2) residual.
    """
    u0 = ops.as_field(u0, grid)
    dnu = ops.normal_derivative(u0, grid, ops.GAMMA1, 2)
    lap = ops.laplacian_apply(u0, grid)[-1]
    return float(abs(dnu + params.A * lap + nonlinearity(u0[-1], params) - g_b))
