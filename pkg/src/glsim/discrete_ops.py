"""Second-order flux-form operators and discrete norms on a RadialGrid.

The Laplacian is differenced in conservative form
``r^(1-N) d/dr (r^(N-1) du/dr)`` so that, together with the midpoint
V-inner product, summation by parts holds exactly:

    sum_{j=1}^{M-1} w_j (Lap_h u)_j conj(v_j)
        = -(u, v)_{V,h} + omega * flux_{M-1/2}(u) * conj(v_M)

for every pair of fields vanishing at node 0 (``w_j`` the interior volume
weights).
"""

import numpy as np

GAMMA0 = "G0"
GAMMA1 = "G1"


def as_field(u, grid):
    u = np.asarray(u, dtype=complex)
    if u.shape != (grid.size,):
        raise ValueError(f"field has shape {u.shape}, grid needs ({grid.size},)")
    return u


def face_radii_power(grid):
    return grid.midpoints ** (grid.N - 1)


def fluxes(u, grid):
    """Radial fluxes ``r_{j+1/2}^{N-1} (u_{j+1} - u_j) / h`` on the M faces."""
    return face_radii_power(grid) * np.diff(u) / grid.h


def one_sided_derivative(u, grid, end, order=2):
    """du/dr (not the outward normal derivative) at one end of the grid."""
    h = grid.h
    if end == GAMMA1:
        if order == 1:
            return (u[-1] - u[-2]) / h
        return (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    if order == 1:
        return (u[1] - u[0]) / h
    return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)


def normal_derivative(u, grid, end=GAMMA1, order=2):
    """Outward normal derivative; at Gamma0 the normal points toward -r."""
    if end not in (GAMMA0, GAMMA1):
        raise ValueError(f"end must be {GAMMA0!r} or {GAMMA1!r}, got {end!r}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    u = as_field(u, grid)
    du = one_sided_derivative(u, grid, end, order)
    return du if end == GAMMA1 else -du


def _one_sided_laplacian(u, grid, end):
    h = grid.h
    if end == GAMMA1:
        urr = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h**2
        r = grid.r1
    else:
        urr = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h**2
        r = grid.r0
    if grid.N == 1:
        return urr
    return urr + (grid.N - 1) / r * one_sided_derivative(u, grid, end, 2)


def laplacian_apply(u, grid):
    """Flux-form radial Laplacian at every node.

    Interior values come from the conservative three-point stencil; the two
    end values are second-order one-sided extrapolations meant for
    diagnostics only.
    """
    u = as_field(u, grid)
    F = fluxes(u, grid)
    out = np.empty_like(u)
    out[1:-1] = (F[1:] - F[:-1]) / (grid.nodes[1:-1] ** (grid.N - 1) * grid.h)
    out[0] = _one_sided_laplacian(u, grid, GAMMA0)
    out[-1] = _one_sided_laplacian(u, grid, GAMMA1)
    return out


def boundary_flux_ratio(grid):
    """``(r_{M-1/2} / r1)^(N-1)``, the face-to-boundary area ratio."""
    return (grid.midpoints[-1] / grid.r1) ** (grid.N - 1)


def wentzell_laplacian(u, grid, order=2):
    """Boundary Laplacian at Gamma1 used by the Wentzell boundary row.

    Order 2 is the four-point one-sided value of :func:`laplacian_apply`;
    order 1 copies the interior stencil from node M-1.
    """
    u = as_field(u, grid)
    if order == 2:
        return _one_sided_laplacian(u, grid, GAMMA1)
    h = grid.h
    face = grid.midpoints[-2:] ** (grid.N - 1)
    Fa = face[0] * (u[-2] - u[-3]) / h
    Fb = face[1] * (u[-1] - u[-2]) / h
    return (Fb - Fa) / (grid.nodes[-2] ** (grid.N - 1) * h)


def v_inner(u, v, grid):
    """Discrete ``(grad u, grad v)_{L2}`` with midpoint radial weights."""
    du = np.diff(u) / grid.h
    dv = np.diff(v) / grid.h
    w = grid.omega * face_radii_power(grid) * grid.h
    return complex(np.sum(w * du * np.conj(dv)))


def norm_v(u, grid):
    u = as_field(u, grid)
    du = np.diff(u) / grid.h
    w = grid.omega * face_radii_power(grid) * grid.h
    return float(np.sqrt(np.sum(w * np.abs(du) ** 2)))


def lp_power_interior(u, grid, p_exp):
    """``sum_j w_j |u_j|^p``, i.e. the p-th power of the interior Lp norm."""
    if p_exp < 1:
        raise ValueError(f"exponent must be >= 1, got {p_exp}")
    return float(np.sum(grid.volume_weights * np.abs(u) ** p_exp))


def norm_lp_interior(u, grid, p_exp):
    u = as_field(u, grid)
    return lp_power_interior(u, grid, p_exp) ** (1.0 / p_exp)


def boundary_value_norms(value, grid, p_exp):
    """Lp(Gamma1) norm of a radial boundary trace.

    ``value`` is either a field (its last entry is used) or the trace itself,
    e.g. the boundary time derivative.
    """
    if p_exp < 1:
        raise ValueError(f"exponent must be >= 1, got {p_exp}")
    value = np.asarray(value)
    z = value[-1] if value.ndim else value
    return float(grid.surface_measure_G1 ** (1.0 / p_exp) * abs(z))


def weighted_l2_sq(values, grid):
    return float(np.sum(grid.volume_weights * np.abs(values) ** 2))


def wentzell_row_residual(u, grid, params, order=2):
    """``D_nu u + (lambda + i alpha) Lap_b u`` at Gamma1 (zero on the domain)."""
    return (normal_derivative(u, grid, GAMMA1, order)
            + params.A * wentzell_laplacian(u, grid, order))


def project_wentzell(u, grid, params, order=2):
    """Copy of ``u`` with u_0 = 0 and u_M chosen to satisfy the Wentzell row."""
    u = as_field(u, grid).copy()
    u[0] = 0.0
    u[-1] = 0.0
    base = wentzell_row_residual(u, grid, params, order)
    u[-1] = 1.0
    slope = wentzell_row_residual(u, grid, params, order) - base
    u[-1] = -base / slope
    return u


def dissipativity_terms(grid, params, u, order=2):
    """Pieces of the discrete dissipativity identity for a constrained field.

    Returns ``(re_Au_u, lap_sq, flux_sq)`` with ``A_h u`` equal to
    ``(lambda + i alpha) Lap_h u`` in the interior, the Wentzell boundary
    Laplacian at Gamma1 and zero on Gamma0 (so that A_h u lies in V).
    """
    u = as_field(u, grid)
    lap = laplacian_apply(u, grid)
    lap[0] = 0.0
    lap[-1] = wentzell_laplacian(u, grid, order)
    Au = params.A * lap
    re_Au_u = v_inner(Au, u, grid).real
    lap_sq = weighted_l2_sq(lap, grid)
    flux_sq = boundary_value_norms(normal_derivative(u, grid, GAMMA1, order), grid, 2) ** 2
    return re_Au_u, lap_sq, flux_sq


def dissipativity_residual(grid, params, u, order=2):
    """``|Re(A_h u, u)_V + lambda ||Lap_h u||^2 + ||d_nu u||^2_{Gamma1}|``."""
    re_Au_u, lap_sq, flux_sq = dissipativity_terms(grid, params, u, order)
    return abs(re_Au_u + params.lam * lap_sq + flux_sq)


def smooth_constrained_field(grid, params, coeffs, order=2):
    """Sample a smooth field satisfying the continuum Wentzell condition.

    ``coeffs`` weight the modes ``sin(k pi xi / 2)``, ``xi = (r - r0)/L``;
    a multiple of ``xi^2`` is added so that ``u_r + A Lap u = 0`` at r1.
    The sampled field is finally projected onto the discrete boundary row.
    Using the same ``coeffs`` on several grids gives the same continuum
    function, which is what refinement studies need.
    """
    L = grid.r1 - grid.r0
    r = grid.nodes
    xi = (r - grid.r0) / L
    A = params.A
    curv = (grid.N - 1) / grid.r1
    u = np.zeros(grid.size, dtype=complex)
    bc = 0.0j
    for k, c in enumerate(np.asarray(coeffs, dtype=complex), start=1):
        kk = k * np.pi / (2.0 * L)
        u += c * np.sin(kk * (r - grid.r0))
        d1 = kk * np.cos(kk * L)
        d2 = -kk**2 * np.sin(kk * L)
        bc += c * (d1 + A * (d2 + curv * d1))
    psi_d1 = 2.0 / L
    psi_d2 = 2.0 / L**2
    u += -bc / (psi_d1 + A * (psi_d2 + curv * psi_d1)) * xi**2
    return project_wentzell(u, grid, params, order)
