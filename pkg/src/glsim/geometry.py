"""Radially symmetric domains: an interval (N=1) or an annulus/shell (N=2, 3).

Node 0 sits on the Dirichlet boundary piece (``Gamma0``, r = r0) and node M on
the dynamic boundary piece (``Gamma1``, r = r1).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimension, InvalidRadii, TooCoarse

#: Surface measure of the unit sphere in R^N for the supported dimensions.
SPHERE_MEASURE = {1: 1.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    r0: float
    r1: float
    M: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    midpoints: np.ndarray = field(init=False, repr=False)
    volume_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = (self.r1 - self.r0) / self.M
        nodes = self.r0 + h * np.arange(self.M + 1)
        nodes[-1] = self.r1
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        weights = self.omega * nodes ** (self.N - 1) * h
        weights[0] *= 0.5
        weights[-1] *= 0.5
        for name, value in (("h", h), ("nodes", nodes), ("midpoints", mids),
                            ("volume_weights", weights)):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def omega(self):
        return SPHERE_MEASURE[self.N]

    @property
    def size(self):
        return self.M + 1

    @property
    def surface_measure_G1(self):
        return self.omega * self.r1 ** (self.N - 1)

    @property
    def surface_measure_G0(self):
        return self.omega * self.r0 ** (self.N - 1)

    @property
    def volume(self):
        """Exact measure of the domain."""
        return self.omega * (self.r1 ** self.N - self.r0 ** self.N) / self.N

    def refine(self, factor=2):
        return build_grid(self.N, self.r0, self.r1, self.M * factor)


def build_grid(N, r0, r1, M):
    """Uniform radial grid with ``M`` cells on ``[r0, r1]``.

    Raises InvalidDimension, InvalidRadii or TooCoarse on bad input.
    """
    if N not in SPHERE_MEASURE:
        raise InvalidDimension(f"N must be 1, 2 or 3, got {N!r}")
    r0 = float(r0)
    r1 = float(r1)
    if not (np.isfinite(r0) and np.isfinite(r1)) or r0 < 0 or r1 <= r0:
        raise InvalidRadii(f"need r1 > r0 >= 0, got r0={r0}, r1={r1}")
    if N >= 2 and r0 == 0:
        raise InvalidRadii(f"N={N} requires an annulus (r0 > 0)")
    if int(M) != M or M < 4:
        raise TooCoarse(f"need at least 4 cells, got M={M}")
    return RadialGrid(int(N), r0, r1, int(M))


@dataclass(frozen=True)
class GeometricReport:
    holds: bool
    gamma0_product: float
    gamma1_product: float
    x0: float


def geometric_condition_check(grid, x0_offset=0.0):
    """Check the multiplier condition (x - x0).nu <= 0 on Gamma0, > 0 on Gamma1.

    ``x0_offset`` is measured along the radial axis from the domain center
    (the origin for an annulus, 0 for the interval). For N >= 2 the worst
    case over the sphere is reported: a point x0 = s*e gives
    (x - x0).nu = r - s*cos(theta) on a sphere of radius r with outward
    normal, so the extreme values are r +/- |s|.
    """
    s = float(x0_offset)
    if grid.N == 1:
        # Gamma0 at r0 with normal -1, Gamma1 at r1 with normal +1
        g0 = -(grid.r0 - s)
        g1 = grid.r1 - s
    else:
        # inner sphere has inward-pointing (toward origin) outer normal
        g0 = -grid.r0 + abs(s)
        g1 = grid.r1 - abs(s)
    return GeometricReport(bool(g0 <= 0.0 and g1 > 0.0), g0, g1, s)
