import numpy as np
import pytest

from contfrob.boxes import Box
from contfrob.errors import EvalDomainError, MarginError, ResolutionError
from contfrob.fields import parse_field
from contfrob.moduli import Hoelder, Lipschitz
from contfrob.mollify import (GridFunction, grid_from_csv, grid_from_field,
                              grid_to_csv, kernel, mollify, read_grid_binary,
                              to_spline_field, verify_bounds,
                              write_grid_binary)


def _line_grid(n=801, lo=-1.0, hi=1.0, fn=np.abs):
    xs = np.linspace(lo, hi, n)
    return GridFunction((xs,), fn(xs))


def test_kernel_mass_and_symmetry():
    h = 0.1 / 16
    k1 = kernel(0.1, (h,))
    assert abs(k1.values.sum() * h - 1.0) < 1e-8
    assert np.allclose(k1.values, k1.values[::-1])

    k2 = kernel(0.1, (h, h))
    assert abs(k2.values.sum() * h * h - 1.0) < 1e-8
    # radially symmetric within grid symmetry
    assert np.allclose(k2.values, k2.values.T)
    assert np.allclose(k2.values, k2.values[::-1, :])


def test_kernel_vanishes_at_support_boundary():
    h = 0.1 / 16
    k1 = kernel(0.1, (h,))
    edge = np.abs(np.abs(k1.axes[0]) - 0.1) < h / 2
    assert np.all(k1.values[np.abs(k1.axes[0]) >= 0.1] == 0.0)
    assert np.any(edge)


def test_kernel_resolution_error():
    with pytest.raises(ResolutionError):
        kernel(0.1, (0.05,))


def test_mollify_constant_preserved():
    g = _line_grid(fn=lambda x: np.full_like(x, 2.5))
    m = mollify(g, 0.1)
    assert np.max(np.abs(m.interior_values() - 2.5)) < 1e-8


def test_mollify_linear_preserved():
    g = _line_grid(fn=lambda x: x)
    m = mollify(g, 0.1)
    sl = m.interior_slices()
    assert np.max(np.abs(m.values[sl] - g.axes[0][sl[0]])) < 1e-6


def test_mollify_abs_peak_at_origin():
    g = _line_grid()
    m = mollify(g, 0.1)
    sl = m.interior_slices()
    diff = np.abs(m.values[sl] - g.values[sl])
    i_max = int(np.argmax(diff))
    x_at_max = g.axes[0][sl[0]][i_max]
    assert abs(x_at_max) < 1e-9
    assert 0.0 < diff[i_max] <= 0.1


def test_mollify_margin_error():
    g = _line_grid(n=101, lo=-0.2, hi=0.2)
    with pytest.raises(MarginError):
        mollify(g, 0.25)


def test_smoothing_error_shrinks_with_eps():
    g = _line_grid()
    sups = []
    for eps in [0.2, 0.1, 0.05]:
        m = mollify(g, eps)
        sl = m.interior_slices()
        sups.append(np.max(np.abs(m.values[sl] - g.values[sl])))
    assert sups[0] > sups[1] > sups[2]


def test_verify_bounds_abs_lipschitz():
    g = _line_grid(n=1601)
    reports = verify_bounds(g, Lipschitz(1.0), [Lipschitz(1.0)],
                            [0.1, 0.05, 0.025])
    ks = [r.fitted_K for r in reports]
    assert all(k == ks[0] for k in ks)  # single global fit
    assert all(r.ok() for r in reports)
    # derivative sup stays ~1 for |x| regardless of eps
    for r in reports:
        assert r.deriv_sup[0] <= 1.0 + 1e-6
        assert r.deriv_sup[0] >= 0.9


def test_verify_bounds_constant_function():
    g = _line_grid(fn=lambda x: np.full_like(x, 1.0), n=801)
    reports = verify_bounds(g, Lipschitz(1.0), [Lipschitz(1.0)], [0.1])
    assert reports[0].sup_dist < 1e-10
    assert reports[0].ok()


def test_verify_bounds_sqrt_scaling():
    g = _line_grid(n=3201, fn=lambda x: np.sqrt(np.abs(x)))
    reports = verify_bounds(g, Hoelder(0.5, 1.0), [Hoelder(0.5, 1.0)],
                            [0.1, 0.05, 0.025])
    scaled = [r.deriv_sup[0] * np.sqrt(r.eps) for r in reports]
    # fit d log(deriv_sup) / d log(eps): expect -1/2 within +-0.1
    slopes = np.diff(np.log([r.deriv_sup[0] for r in reports])) / \
        np.diff(np.log([r.eps for r in reports]))
    assert np.all(np.abs(slopes + 0.5) < 0.1)
    assert max(scaled) / min(scaled) < 1.25
    assert all(r.ok() for r in reports)


def test_verify_bounds_two_dim():
    n = 401
    xs = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    g = GridFunction((xs, xs), np.abs(X) + 0.5 * np.abs(Y))
    reports = verify_bounds(g, Lipschitz(1.5), [Lipschitz(1.0),
                                                Lipschitz(0.5)], [0.1, 0.05])
    for r in reports:
        assert r.ok()
        assert r.deriv_sup[0] <= 1.0 + 1e-6
        assert r.deriv_sup[1] <= 0.5 + 1e-6
    assert reports[0].fitted_K == reports[1].fitted_K


def test_verify_bounds_resolution_guard():
    g = _line_grid(n=41)
    with pytest.raises(ResolutionError):
        verify_bounds(g, Lipschitz(1.0), [Lipschitz(1.0)], [0.1])


def test_fitted_K_stable_across_halvings():
    g = _line_grid(n=3201)
    ks = []
    for eps in [0.1, 0.05, 0.025]:
        r = verify_bounds(g, Lipschitz(1.0), [Lipschitz(1.0)], [eps])[0]
        ks.append(r.fitted_K)
    assert max(ks) / min(ks) < 2.0


def test_binary_roundtrip(tmp_path):
    box = Box.from_dict({"x": (-1, 1), "y": (0, 2)})
    g = grid_from_field(parse_field("x^2 + y"), box, [33, 17])
    p = tmp_path / "g.bin"
    write_grid_binary(g, p)
    g2 = read_grid_binary(p)
    assert np.allclose(g2.values, g.values)
    assert all(np.allclose(a, b) for a, b in zip(g2.axes, g.axes))
    assert g2.margin == g.margin


def test_csv_roundtrip():
    g = _line_grid(n=21)
    g2 = grid_from_csv(grid_to_csv(g))
    assert np.allclose(g2.values, g.values)

    box = Box.from_dict({"x": (-1, 1), "y": (0, 1)})
    h = grid_from_field(parse_field("x*y"), box, [9, 7])
    h2 = grid_from_csv(grid_to_csv(h))
    assert np.allclose(h2.values, h.values)


def test_spline_field_matches_and_differentiates():
    xs = np.linspace(0.0, 1.0, 400)
    g = GridFunction((xs,), np.sin(3 * xs))
    f = to_spline_field(g, ("x",))
    t = np.linspace(0.05, 0.95, 50)
    assert np.allclose(f.evaluate({"x": t}), np.sin(3 * t), atol=1e-6)
    df = f.diff("x")
    assert np.allclose(df.evaluate({"x": t}), 3 * np.cos(3 * t), atol=1e-4)
    with pytest.raises(EvalDomainError):
        f.evaluate({"x": 1.5})


def test_spline_2d_mixed_partials_identical():
    box = Box.from_dict({"x": (0, 1), "y": (0, 1)})
    g = grid_from_field(parse_field("exp(x*y)"), box, [60, 60])
    f = to_spline_field(g, ("x", "y"))
    fxy = f.diff("x").diff("y")
    fyx = f.diff("y").diff("x")
    assert fxy == fyx  # interned leaf: identical object, identical floats
    env = {"x": 0.4, "y": 0.6}
    assert fxy.evaluate(env) == fyx.evaluate(env)
