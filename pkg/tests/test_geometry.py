import math

import numpy as np
import pytest

from glsim import build_grid, geometric_condition_check
from glsim.errors import InvalidDimension, InvalidRadii, TooCoarse


def test_unit_interval_nodes():
    g = build_grid(1, 0, 1, 10)
    assert g.size == 11
    np.testing.assert_allclose(g.nodes, np.linspace(0, 1, 11), atol=1e-15)
    assert g.h == pytest.approx(0.1)


def test_disc_without_hole_rejected():
    with pytest.raises(InvalidRadii):
        build_grid(2, 0, 1, 10)


@pytest.mark.parametrize("args, exc", [
    ((4, 0.5, 1.0, 10), InvalidDimension),
    ((1, 1.0, 0.5, 10), InvalidRadii),
    ((1, -0.1, 1.0, 10), InvalidRadii),
    ((1, 0.0, 1.0, 3), TooCoarse),
    ((1, 0.0, 1.0, 10.5), TooCoarse),
])
def test_bad_inputs(args, exc):
    with pytest.raises(exc):
        build_grid(*args)


def test_shell_volume_second_order():
    exact = 4 * math.pi * (1.5**3 - 0.5**3) / 3
    errs = [abs(build_grid(3, 0.5, 1.5, M).volume_weights.sum() - exact) / exact for M in (64, 128, 256)]
    assert errs[0] < 1e-3
    for coarse, fine in zip(errs, errs[1:]):
        assert coarse / fine == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_weights_nonnegative_and_readonly(N):
    g = build_grid(N, 0.5, 2.0, 16)
    assert np.all(g.volume_weights >= 0)
    with pytest.raises(ValueError):
        g.volume_weights[0] = 1.0


def test_surface_measures():
    g = build_grid(2, 0.5, 2.0, 8)
    assert g.surface_measure_G1 == pytest.approx(2 * math.pi * 2.0)
    assert g.surface_measure_G0 == pytest.approx(2 * math.pi * 0.5)


def test_refine_halves_h():
    g = build_grid(2, 0.5, 1.5, 8)
    f = g.refine()
    assert f.M == 16 and f.h == pytest.approx(g.h / 2)


def test_geometric_condition_annulus():
    rep = geometric_condition_check(build_grid(2, 0.5, 1.5, 8))
    assert rep.holds
    assert rep.gamma0_product == pytest.approx(-0.5)
    assert rep.gamma1_product == pytest.approx(1.5)


def test_geometric_condition_interval():
    g = build_grid(1, 0, 1, 8)
    assert geometric_condition_check(g, 0.0).holds
    bad = geometric_condition_check(g, 2.0)
    assert not bad.holds
    assert bad.gamma1_product == pytest.approx(-1.0)
