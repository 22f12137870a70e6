import math

import numpy as np
import pytest

from contfrob.errors import (EvalDomainError, InsufficientDataError,
                             SingularIntegrandError)
from contfrob.moduli import (FAILS, HOLDS, Hoelder, Lipschitz, LogLip,
                             MaxModulus, ScaleModulus, SumModulus, Tabulated,
                             algebra_product, algebra_quotient, algebra_sum,
                             check_monotone, estimate_modulus,
                             fit_loglog_slope, limit_condition_check,
                             modulus_to_text, osgood_check, parse_modulus)

ALL_KINDS = [
    Lipschitz(K=2.0),
    Hoelder(alpha=0.5, K=1.0),
    LogLip(beta=1.0, K=1.0),
    SumModulus(Lipschitz(1.0), Hoelder(0.5, 1.0)),
    ScaleModulus(3.0, Lipschitz(1.0)),
    MaxModulus(Lipschitz(1.0), Hoelder(0.3, 1.0)),
    Tabulated(((0.1, 0.05), (0.2, 0.01 + 0.05), (0.4, 0.2))),
]


def test_eval_examples():
    assert Lipschitz(K=2.0)(0.5) == 1.0
    assert LogLip(1.0, 1.0)(1.0 / math.e) == pytest.approx(1.0 / math.e)
    assert Hoelder(0.5, 1.0)(0.25) == 0.5


@pytest.mark.parametrize("w", ALL_KINDS, ids=lambda w: type(w).__name__)
def test_zero_monotone_nonneg(w):
    assert w(0.0) == 0.0
    assert check_monotone(w)


def test_domain_guards():
    with pytest.raises(EvalDomainError):
        LogLip(1.0, 1.0)(0.8)  # beyond cap 1/e
    with pytest.raises(EvalDomainError):
        Lipschitz(1.0)(-0.1)


def test_tabulated_invariants():
    with pytest.raises(ValueError):
        Tabulated(((0.2, 0.1), (0.1, 0.2)))  # descending scales
    with pytest.raises(ValueError):
        Tabulated(((0.1, 0.3), (0.2, 0.2)))  # decreasing values


def test_algebra():
    s = algebra_sum(Lipschitz(1.0), Hoelder(0.5, 1.0))
    assert s(0.25) == pytest.approx(0.25 + 0.5)
    p = algebra_product(Lipschitz(1.0), Lipschitz(1.0), K=3.0)
    assert p(0.5) == pytest.approx(3.0 * (0.5 + 0.5))
    q = algebra_quotient(Lipschitz(1.0), Lipschitz(1.0), K=1.0, c=0.5)
    # the 1/c^2 = 4 prefactor lands on the denominator modulus
    assert q(0.1) == pytest.approx(0.1 + 4.0 * 0.1)
    with pytest.raises(EvalDomainError):
        algebra_quotient(Lipschitz(1.0), Lipschitz(1.0), K=1.0, c=0.0)


def test_algebra_commutes_exactly():
    a, b = Hoelder(0.7, 2.0), LogLip(0.4, 1.5)
    for s in [0.01, 0.1, 0.3]:
        assert algebra_sum(a, b)(s) == algebra_sum(b, a)(s)
        assert MaxModulus(a, b)(s) == MaxModulus(b, a)(s)


def test_osgood_verdicts():
    assert osgood_check(Lipschitz(1.0)).verdict == HOLDS
    assert osgood_check(Hoelder(0.5, 1.0)).verdict == FAILS
    assert osgood_check(LogLip(1.0, 1.0)).verdict == HOLDS


def test_osgood_against_closed_form_loglip():
    # int ds / (-s log s) = log|log s|: cross-check the quadrature trace
    rep = osgood_check(LogLip(1.0, 1.0), depth=30)
    deltas, sums = rep.trace[:, 0], rep.trace[:, 1]
    eps = rep.params["eps"]
    exact = np.log(np.abs(np.log(deltas))) - math.log(abs(math.log(eps)))
    assert np.allclose(sums, exact, atol=1e-8)


def test_osgood_singular_integrand():
    w = Tabulated(((0.01, 0.0), (0.5, 1.0)))  # vanishes below s = 0.01
    with pytest.raises(SingularIntegrandError):
        osgood_check(w, eps=0.5)


def test_osgood_report_records_convention():
    rep = osgood_check(Lipschitz(1.0))
    assert rep.params["convention"] == "holds-on-divergence"
    assert len(rep.trace) > 0


def test_osgood_never_inconclusive():
    # the partial-sum trace is monotone by construction, so the verdict
    # is always decided one way or the other
    for w in ALL_KINDS:
        if isinstance(w, Tabulated):
            continue
        rep = osgood_check(w)
        assert rep.verdict in (HOLDS, FAILS)
        # rows go to smaller scales; the partial sums only ever grow
        assert np.all(np.diff(rep.trace[:, 0]) < 0.0)
        assert np.all(np.diff(rep.trace[:, 1]) >= 0.0)


def test_limit_condition_examples():
    rep = limit_condition_check(Hoelder(0.9, 1.0), LogLip(0.5, 1.0))
    assert rep.verdict == HOLDS
    assert rep.params["fitted_slope"] == pytest.approx(0.4, abs=1e-6)

    assert limit_condition_check(Lipschitz(1.0), Lipschitz(1.0)).verdict == HOLDS

    rep = limit_condition_check(Hoelder(0.5, 1.0), Hoelder(0.5, 1.0))
    assert rep.verdict == FAILS
    # trace increases monotonically below s = 1e-2 (on the pre-overflow part)
    s, q = rep.trace[:, 0], rep.trace[:, 1]
    small = (s < 1e-2) & (s > 2e-5)
    assert np.all(np.diff(np.log(q[small])) >= 0.0)


def test_limit_condition_scale_invariance():
    w1, w2 = Hoelder(0.9, 1.0), LogLip(0.5, 1.0)
    for c in [0.01, 1.0, 250.0]:
        rep = limit_condition_check(ScaleModulus(c, w1), w2)
        assert rep.verdict == HOLDS


def test_estimate_modulus_linear():
    xs = np.linspace(0.0, 1.0, 150)[:, None]
    h = xs[1, 0] - xs[0, 0]
    tab = estimate_modulus(xs, 3.0 * xs[:, 0])
    # sup over pairs at distance <= s is 3*floor(s/h)*h: within bucket
    # resolution of the Lipschitz-3 line
    for s, v in tab.breakpoints:
        assert 3.0 * (s - h) <= v <= 3.0 * s + 1e-12


def test_estimate_modulus_masked_constant_direction():
    g = np.linspace(0.0, 1.0, 12)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    vals = pts[:, 1]  # f(x, y) = y
    tab = estimate_modulus(pts, vals, direction_mask=[0])
    assert max(v for _, v in tab.breakpoints) == 0.0


def test_estimate_modulus_sqrt():
    xs = np.linspace(0.0, 1.0, 1000)[:, None]
    tab = estimate_modulus(xs, np.sqrt(xs[:, 0]), n_buckets=8)
    for s, v in tab.breakpoints:
        assert v == pytest.approx(math.sqrt(s), rel=0.10)


def test_estimate_modulus_needs_samples():
    xs = np.linspace(0.0, 1.0, 50)[:, None]
    with pytest.raises(InsufficientDataError):
        estimate_modulus(xs, xs[:, 0])


@pytest.mark.parametrize("w", ALL_KINDS, ids=lambda w: type(w).__name__)
def test_serialization_roundtrip(w):
    text = modulus_to_text(w)
    w2 = parse_modulus(text)
    s = min(w.domain_cap, 0.3) * np.array([0.1, 0.5, 1.0])
    assert np.allclose(w(s), w2(s))
    assert modulus_to_text(w2) == text


def test_report_csv_format():
    rep = limit_condition_check(Lipschitz(1.0), Lipschitz(1.0))
    text = rep.to_csv()
    assert text.startswith("# criterion=LimitCondition\n# verdict=Holds")
    assert "s,quantity" in text


def test_fit_loglog_slope_window():
    s = np.geomspace(1.0, 1e-10, 60)
    trace = np.stack([s, s ** 0.4], axis=1)
    assert fit_loglog_slope(trace, (1e-8, 1e-3)) == pytest.approx(0.4)
