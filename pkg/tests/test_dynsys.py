import math

import numpy as np
import pytest

from contfrob.boxes import Box
from contfrob.dynsys import (DiffeoSpec, PlaneFieldSamples, domination_report,
                             orthonormal_pullback_frames,
                             splitting_involutivity_pipeline,
                             splitting_report_to_csv, transport)
from contfrob.fields import parse_field
from contfrob.geometry import (compatibility_defect, max_principal_angle,
                               subspace_distance)
from contfrob.presets import (cat_contracting_direction, cat_eigenvalues,
                              cat_expanding_direction, cat_map,
                              constant_annihilator_frame, skew_product,
                              skew_seed_bases)

LAM_MINUS, LAM_PLUS = cat_eigenvalues()


def torus_lattice(d, res=5):
    axes = [np.linspace(0.0, 1.0, res, endpoint=False)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def test_cat_map_inverse_and_jacobian():
    phi = cat_map()
    pts = torus_lattice(2)
    assert phi.check_inverse(pts)
    J = phi.jacobian(pts)
    assert np.allclose(J, [[2.0, 1.0], [1.0, 1.0]])


def test_skew_product_inverse():
    phi = skew_product()
    pts = torus_lattice(3, res=4)
    assert phi.check_inverse(pts)


def test_transport_k0_identity():
    phi = cat_map()
    pts = torus_lattice(2)
    e0 = np.array([[1.0], [0.0]])
    out = transport(phi, e0, 0, pts)
    assert np.allclose(np.abs(out.bases[:, 0, 0]), 1.0)


def test_transport_converges_to_contracting_direction():
    phi = cat_map()
    pts = torus_lattice(2)
    e0 = np.array([[1.0], [0.0]])
    ek = transport(phi, e0, 10, pts)
    target = cat_contracting_direction()[:, None]
    ang = max_principal_angle(ek.bases, np.broadcast_to(
        target, ek.bases.shape))
    assert np.max(ang) < 1e-3


def test_transport_cocycle_property():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    e0 = np.array([[1.0], [0.0]])
    k1, k2 = 3, 4
    direct = transport(phi, e0, k1 + k2, pts)

    def field_k2(qs):
        return transport(phi, e0, k2, qs).bases

    composed = transport(phi, field_k2, k1, pts)
    gap = subspace_distance(direct.bases, composed.bases)
    assert np.max(gap) <= 1e-8


def test_conorm_duality():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    f = cat_expanding_direction()[:, None]
    for k in (1, 4, 9):
        orbit = phi.orbit(pts, k)
        M = np.broadcast_to(f, (len(pts), 2, 1)).copy()
        for j in range(k):
            M = phi.jacobian(orbit[j]) @ M
        smin = np.linalg.svd(M, compute_uv=False)[:, -1]
        dual = 1.0 / np.linalg.svd(np.linalg.pinv(M), compute_uv=False)[:, 0]
        assert np.allclose(smin, dual, atol=1e-10)


def test_cat_map_exact_rates():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    e0 = cat_contracting_direction()[:, None]  # invariant seed: exact rates
    f = cat_expanding_direction()[:, None]
    rep = domination_report(phi, e0, f, 15, pts)
    for i, k in enumerate(rep.k_values):
        if 5 <= k <= 15:
            rate = rep.norm_E[i] ** (1.0 / k)
            assert 0.95 * LAM_MINUS <= rate <= 1.05 * LAM_MINUS
            conorm_rate = rep.conorm_F[i] ** (1.0 / k)
            assert 0.95 * LAM_PLUS <= conorm_rate <= 1.05 * LAM_PLUS
    assert rep.dominated


def test_cat_map_decay_quantity():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    rep = domination_report(phi, np.array([[1.0], [0.0]]),
                            cat_expanding_direction()[:, None], 12, pts,
                            eps_list=(1.0,))
    q = rep.q[1.0]
    for i in range(2, len(q) - 1):
        assert q[i + 1] < q[i]
        assert q[i + 1] / q[i] <= 0.2


def test_vertical_comparison_constant():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    rep = domination_report(phi, cat_contracting_direction()[:, None],
                            cat_expanding_direction()[:, None], 10, pts,
                            y_indices=[1])
    # fitted constant of |Dphi^k v| >= C m(Dphi^k|_F) for vertical v:
    # positive (the axis is transverse to the contracting direction)
    # and at most 1 (it cannot beat the conorm of the full expansion)
    assert 0.0 < rep.vertical_C <= 1.0 + 1e-12
    assert math.isfinite(rep.vertical_C)


def test_identity_map_not_dominated():
    ident = DiffeoSpec(("x1", "x2"),
                       [parse_field("x1"), parse_field("x2")],
                       [parse_field("x1"), parse_field("x2")], torus=True)
    pts = torus_lattice(2, res=3)
    rep = domination_report(ident, np.array([[1.0], [0.0]]),
                            np.array([[0.0], [1.0]]), 4, pts)
    assert not rep.dominated
    assert rep.norm_E[0] == pytest.approx(1.0)
    assert rep.conorm_F[0] == pytest.approx(1.0)


def test_skew_product_bounded_growth_and_angles():
    phi = skew_product()
    pts = torus_lattice(3, res=4)
    e0 = skew_seed_bases()
    eu = np.concatenate([cat_expanding_direction(), [0.0]])[:, None]
    f = transport(phi.inverted(), eu, 8, pts).bases
    rep = domination_report(phi, e0, PlaneFieldSamples(pts, f), 8, pts)
    assert rep.dominated
    assert abs(rep.growth_C) <= 0.05
    # successive transported fields are angle-Cauchy: each consecutive
    # angle shrinks by at least a factor 2
    for a, b in zip(rep.angles[1:], rep.angles[2:]):
        assert b <= a / 2.0


def test_pullback_frames_k0_and_annihilation():
    phi = cat_map()
    pts = torus_lattice(2, res=4)
    base = constant_annihilator_frame(np.array([[0.0, 1.0]]),
                                      ("x1", "x2"), ("x2",))
    frames = orthonormal_pullback_frames(phi, base, 6, check_points=pts)
    assert np.allclose(frames[0].matrix_at(pts), base.matrix_at(pts))
    e0 = np.array([[1.0], [0.0]])
    for k in (1, 3, 6):
        ek = transport(phi, e0, k, pts)
        pairing = frames[k].matrix_at(pts) @ ek.bases
        assert np.max(np.abs(pairing)) <= 1e-8


def test_pullback_compatibility_isometry():
    # two orthonormal conormal frames of one plane field pull back to
    # frames whose transition has operator norm exactly 1
    phi = skew_product()
    pts = torus_lattice(3, res=3)
    n1 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    c, s = math.cos(0.4), math.sin(0.4)
    n2 = np.array([[0.0, c, s], [0.0, -s, c]])
    f1 = constant_annihilator_frame(n1, ("x1", "x2", "x3"), ("x2", "x3"))
    f2 = constant_annihilator_frame(n2, ("x1", "x2", "x3"), ("x2", "x3"))
    from contfrob.dynsys import PullbackFrame
    a = PullbackFrame(phi, f1, 4)
    b = PullbackFrame(phi, f2, 4)
    assert compatibility_defect(a, b, pts) <= 1e-8


def test_pullback_frames_reject_non_orthonormal():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    base = constant_annihilator_frame(np.array([[0.0, 2.0]]),
                                      ("x1", "x2"), ("x2",))
    base = base.scale(2.0)
    with pytest.raises(ValueError):
        orthonormal_pullback_frames(phi, base, 3, check_points=pts)


def test_pipeline_cat_map_traces():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    base = constant_annihilator_frame(np.array([[0.0, 1.0]]),
                                      ("x1", "x2"), ("x2",))
    e0 = np.array([[1.0], [0.0]])
    lim = np.broadcast_to(cat_contracting_direction()[:, None],
                          (len(pts), 2, 1))
    rep, asym, ext = splitting_involutivity_pipeline(
        phi, e0, base, cat_expanding_direction()[:, None], 10, 1.0, pts,
        limit=lim, n_dirs=16)
    assert rep.dominated
    # constant base frame: d of the pullback vanishes identically
    assert all(t.q == 0.0 for t in asym)
    ratios = [ext[i + 1].q / ext[i].q for i in range(5, 9)]
    for r in ratios:
        assert r == pytest.approx(LAM_MINUS / LAM_PLUS, rel=0.05)


def test_pipeline_identity_not_applicable():
    ident = DiffeoSpec(("x1", "x2"),
                       [parse_field("x1"), parse_field("x2")],
                       [parse_field("x1"), parse_field("x2")], torus=True)
    pts = torus_lattice(2, res=3)
    base = constant_annihilator_frame(np.array([[0.0, 1.0]]),
                                      ("x1", "x2"), ("x2",))
    rep, asym, ext = splitting_involutivity_pipeline(
        ident, np.array([[1.0], [0.0]]), base, np.array([[0.0], [1.0]]),
        4, 1.0, pts)
    assert not rep.dominated
    assert asym is None and ext is None


def test_splitting_report_csv():
    phi = cat_map()
    pts = torus_lattice(2, res=3)
    rep = domination_report(phi, np.array([[1.0], [0.0]]),
                            cat_expanding_direction()[:, None], 5, pts)
    text = splitting_report_to_csv(rep)
    assert text.startswith("# report=splitting")
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0].startswith("k,norm_E,conorm_F,q_eps")
    assert len(body) == 6
