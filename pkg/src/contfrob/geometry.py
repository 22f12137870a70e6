"""Distributions in graph form, annihilator frames, and sup-norm functionals.

A rank-m distribution on a box in R^{m+n} is spanned by
X_i = d/dx_i + sum_j a_ij d/dy_j; its annihilator frame has rows
eta_j = dy_j - sum_i a_ij dx_i.  On top of these the module computes the
quantities the integrability diagnostics are made of:

* the involutivity defect |eta_1 ^ ... ^ eta_n ^ d eta_j| per point,
* the restricted inverse (A|_Y)^{-1} and its spectral norm,
* the mixing constant  M_A = sup |dA(A^{-1} w, v)|  over unit w in R^n
  and unit v in the distribution, and
* the per-step traces combining them with e^{eps M} weights.

True sup-norms over a region are approximated from below: a point
lattice, one sampled unit sphere (the second sphere maximization is an
exact singular-value computation), and a few rounds of coordinate ascent
around the best sample.  Every estimate records its sampling protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boxes import Box, env_of
from .errors import DegenerateSubspaceError, TransversalityError
from .fields import Const, Field, ZERO, neg
from .forms import (KForm, exterior_derivative, numeric_wedge_norm, one_form,
                    two_form_matrix_norm, wedge_all)

__all__ = [
    "Distribution", "FrameSection", "SupEstimate", "annihilator_frame",
    "frobenius_defect", "restricted_inverse", "involutivity_constant",
    "sup_frame_restricted_norm", "sup_d_restricted_norm", "sup_inverse_norm",
    "asymptotic_involutivity_trace", "exterior_regularity_trace",
    "compatibility_defect", "orthonormalize", "max_principal_angle",
    "TraceEntry",
]


@dataclass
class Distribution:
    """Rank-m tangent distribution in graph form over a coordinate box."""

    x_names: tuple
    y_names: tuple
    coeffs: list  # coeffs[i][j]: coefficient of d/dy_j in X_i
    domain: Box

    def __post_init__(self):
        self.x_names = tuple(self.x_names)
        self.y_names = tuple(self.y_names)
        assert len(self.coeffs) == self.m
        assert all(len(row) == self.n for row in self.coeffs)
        assert self.domain.names == self.coords

    @property
    def m(self):
        return len(self.x_names)

    @property
    def n(self):
        return len(self.y_names)

    @property
    def coords(self):
        return self.x_names + self.y_names

    @property
    def dim(self):
        return self.m + self.n

    def spanning_fields(self):
        """X_i as coordinate vectors of fields (leading identity block)."""
        out = []
        for i in range(self.m):
            vec = [Const(1.0) if c == i else ZERO for c in range(self.m)]
            vec += list(self.coeffs[i])
            out.append(vec)
        return out

    def spanning_matrix_at(self, points):
        """Columns X_1..X_m at each point: shape (N, dim, m)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = env_of(self.coords, pts)
        out = np.zeros((len(pts), self.dim, self.m))
        for i in range(self.m):
            out[:, i, i] = 1.0
            for j in range(self.n):
                out[:, self.m + j, i] = np.broadcast_to(
                    self.coeffs[i][j].evaluate(env), (len(pts),))
        return out

    def orthonormal_bases_at(self, points):
        return orthonormalize(self.spanning_matrix_at(points))


def orthonormalize(bases):
    """Per-point QR orthonormalization of (N, dim, r) basis stacks."""
    q, r = np.linalg.qr(bases)
    diag = np.einsum("...ii->...i", r)
    if np.any(np.abs(diag) < 1e-12):
        raise DegenerateSubspaceError("rank-deficient subspace basis")
    return q * np.sign(diag)[..., None, :]


def max_principal_angle(b1, b2):
    """Largest principal angle between equal-rank orthonormal bases."""
    s = np.linalg.svd(np.swapaxes(b1, -1, -2) @ b2, compute_uv=False)
    return np.arccos(np.clip(np.min(s, axis=-1), -1.0, 1.0))


def subspace_distance(b1, b2):
    """sin of the largest principal angle (projector gap, 2-norm).

    Unlike the arccos form this stays accurate down to rounding for
    nearly identical subspaces.
    """
    p1 = b1 @ np.swapaxes(b1, -1, -2)
    p2 = b2 @ np.swapaxes(b2, -1, -2)
    return np.linalg.svd(p1 - p2, compute_uv=False)[..., 0]


@dataclass
class FrameSection:
    """n one-forms whose common kernel is the intended distribution."""

    rows: tuple  # KForm degree 1
    coords: tuple
    y_names: tuple
    domain: Box = None
    _d_rows: tuple = field(default=None, repr=False)

    def __post_init__(self):
        self.rows = tuple(self.rows)
        self.coords = tuple(self.coords)
        self.y_names = tuple(self.y_names)
        assert all(r.degree == 1 and r.coords == self.coords
                   for r in self.rows)

    @property
    def n(self):
        return len(self.rows)

    @property
    def dim(self):
        return len(self.coords)

    @property
    def y_indices(self):
        return tuple(self.coords.index(y) for y in self.y_names)

    def d_rows(self):
        if self._d_rows is None:
            self._d_rows = tuple(exterior_derivative(r) for r in self.rows)
        return self._d_rows

    def matrix_at(self, points):
        """(N, n, dim) component matrices of the rows."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = env_of(self.coords, pts)
        out = np.zeros((len(pts), self.n, self.dim))
        for r, row in enumerate(self.rows):
            for (i,), f in row.comps.items():
                out[:, r, i] = np.broadcast_to(f.evaluate(env), (len(pts),))
        return out

    def d_matrices_at(self, points):
        """(N, n, dim, dim) antisymmetric matrices of d(rows)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        env = env_of(self.coords, pts)
        out = np.zeros((len(pts), self.n, self.dim, self.dim))
        for r, dr in enumerate(self.d_rows()):
            out[:, r] = dr.two_form_matrices_at(env)
        return out

    def scale(self, c):
        return FrameSection(tuple(r.scale(c) for r in self.rows),
                            self.coords, self.y_names, self.domain)

    def to_text(self):
        """Component-wise serialization with coordinate names."""
        return "\n".join(f"row{j+1}: {row}"
                         for j, row in enumerate(self.rows)) + "\n"


def annihilator_frame(dist: Distribution) -> FrameSection:
    """Rows eta_j = dy_j - sum_i a_ij dx_i; kills X_i by cancellation."""
    rows = []
    for j, y in enumerate(dist.y_names):
        comps = {y: Const(1.0)}
        for i, x in enumerate(dist.x_names):
            comps[x] = neg(dist.coeffs[i][j])
        rows.append(one_form(dist.coords, comps))
    return FrameSection(tuple(rows), dist.coords, dist.y_names, dist.domain)


# ---------------------------------------------------------------------------
# pointwise objects


def restricted_inverse(frame, point):
    """Inverse of the frame restricted to the vertical subspace at a point.

    Returns (inv, norm): inv maps w in R^n to coefficients on the d/dy
    basis, norm is the spectral norm of that map.
    """
    A = frame.matrix_at(np.asarray(point)[None, :])[0]
    Ay = A[:, list(frame.y_indices)]
    s = np.linalg.svd(Ay, compute_uv=False)
    if s[-1] < 1e-12 * max(1.0, s[0]):
        raise TransversalityError(
            "frame not transverse to the vertical subspace at the point")
    inv = np.linalg.inv(Ay)
    return inv, float(np.linalg.svd(inv, compute_uv=False)[0])


def frobenius_defect(frame, points):
    """max_j |eta_1 ^ ... ^ eta_n ^ d eta_j| at each point (l2 norm)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    env = env_of(frame.coords, pts)
    base = wedge_all(list(frame.rows))
    out = np.zeros(len(pts))
    from .forms import wedge
    for dr in frame.d_rows():
        w = wedge(base, dr)
        out = np.maximum(out, np.broadcast_to(w.norm_at(env), (len(pts),)))
    return out


# ---------------------------------------------------------------------------
# sampled sup-norm machinery


@dataclass
class SupEstimate:
    """Certified lower bound of a sup, with the sampling protocol."""

    value: float
    argmax_point: np.ndarray = None
    protocol: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def _unit_sphere_samples(rng, n_dirs, dim):
    if dim == 1:
        return np.ones((min(n_dirs, 1) or 1, 1))
    v = rng.standard_normal((n_dirs, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sigma_max(stack):
    return np.linalg.svd(stack, compute_uv=False)[..., 0]


def _frame_inverse_embedded(frame, points):
    """Embedded maps R^n -> R^dim inverting the frame on the y-columns."""
    A = frame.matrix_at(points)
    y_idx = list(frame.y_indices)
    Ay = A[:, :, y_idx]
    s = np.linalg.svd(Ay, compute_uv=False)
    if np.any(s[:, -1] < 1e-12 * np.maximum(1.0, s[:, 0])):
        raise TransversalityError("frame loses transversality on the lattice")
    inv = np.linalg.inv(Ay)  # (N, n, n)
    U = np.zeros((len(points), A.shape[2], frame.n))
    U[:, y_idx, :] = inv
    return A, inv, U


def sup_inverse_norm(frame, points):
    """sup_p || (A_p|_Y)^{-1} ||: exact per point, max over the lattice."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _, inv, _ = _frame_inverse_embedded(frame, pts)
    vals = _sigma_max(inv)
    i = int(np.argmax(vals))
    return SupEstimate(float(vals[i]), pts[i], {"points": len(pts)})


def sup_frame_restricted_norm(frame, bases, points):
    """sup_p ||A_p restricted to span(bases_p)||: exact singular value."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = frame.matrix_at(pts)
    vals = _sigma_max(A @ bases)
    i = int(np.argmax(vals))
    return SupEstimate(float(vals[i]), pts[i], {"points": len(pts)})


def _ascend_on_sphere(value_fn, t0, rounds=3, steps=(0.1, 0.03, 0.01)):
    """Deterministic coordinate ascent on the unit sphere."""
    t = t0.copy()
    best = value_fn(t)
    for r in range(rounds):
        step = steps[min(r, len(steps) - 1)]
        for a in range(len(t)):
            for sgn in (1.0, -1.0):
                cand = t.copy()
                cand[a] += sgn * step
                cand /= np.linalg.norm(cand)
                v = value_fn(cand)
                if v > best:
                    best, t = v, cand
    return best, t


def sup_d_restricted_norm(frame, bases, points, n_dirs=256, seed=0, rounds=3):
    """sup over p and unit u, v in the subspace of |dA_p(u, v)|_l2.

    For fixed u the map v -> dA(u, v) is linear, so the v-maximization is
    an exact singular value; only the u-sphere is sampled and refined.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dA = frame.d_matrices_at(pts)  # (N, n, D, D)
    D2 = np.einsum("pda,pjde,peb->pjab", bases, dA, bases)  # (N,n,r,r)
    r = D2.shape[-1]
    rng = np.random.default_rng(seed)
    dirs = _unit_sphere_samples(rng, n_dirs, r)  # (S, r)
    stack = np.einsum("sa,pjab->psjb", dirs, D2)
    vals = _sigma_max(stack)  # (N, S)
    p_best, s_best = np.unravel_index(np.argmax(vals), vals.shape)

    def value_fn(u):
        return float(_sigma_max(np.einsum("a,jab->jb", u, D2[p_best])))

    best, _ = _ascend_on_sphere(value_fn, dirs[s_best].copy(), rounds)
    protocol = {"points": len(pts), "n_dirs": n_dirs, "seed": seed,
                "rounds": rounds, "kind": "lower-bound"}
    return SupEstimate(float(best), pts[p_best], protocol)


def involutivity_constant(frame, dist_or_bases, points, n_dirs=256, seed=0,
                          rounds=3):
    """M_A = sup |dA_p((A_p|_Y)^{-1} w, v)| over unit w, unit v in E, p.

    The w-maximization is exact (singular value of a linear map); the
    v-sphere inside E is sampled with refinement, so the result is a
    lower bound of the true sup under the recorded protocol.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    bases = _as_bases(dist_or_bases, pts)
    dA = frame.d_matrices_at(pts)
    _, _, U = _frame_inverse_embedded(frame, pts)  # (N, D, n)
    # C[p, j, l, a] = (A^{-1} e_l)^T dA_j (B e_a)
    C = np.einsum("pcl,pjcd,pda->pjla", U, dA, bases)
    rng = np.random.default_rng(seed)
    r = bases.shape[-1]
    dirs = _unit_sphere_samples(rng, n_dirs, r)
    stack = np.einsum("sa,pjla->psjl", dirs, C)
    vals = _sigma_max(stack)
    p_best, s_best = np.unravel_index(np.argmax(vals), vals.shape)

    def value_fn(t):
        return float(_sigma_max(np.einsum("a,jla->jl", t, C[p_best])))

    best, _ = _ascend_on_sphere(value_fn, dirs[s_best].copy(), rounds)
    protocol = {"points": len(pts), "n_dirs": n_dirs, "seed": seed,
                "rounds": rounds, "kind": "lower-bound",
                "w_maximization": "exact-svd"}
    return SupEstimate(float(best), pts[p_best], protocol)


def _as_bases(dist_or_bases, points):
    if isinstance(dist_or_bases, Distribution):
        return dist_or_bases.orthonormal_bases_at(points)
    b = np.asarray(dist_or_bases, dtype=float)
    assert b.shape[0] == len(points)
    return b


# ---------------------------------------------------------------------------
# per-step traces


@dataclass
class TraceEntry:
    k: int
    q: float
    strong: float
    parts: dict = field(default_factory=dict)


def _strong_involutivity_parts(frame, points):
    """sup_j |wedge_j|, max_i |d eta_i| evaluated pointwise."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = frame.matrix_at(pts)
    dA = frame.d_matrices_at(pts)
    wedge_sup = 0.0
    for p in range(len(pts)):
        for j in range(frame.n):
            wedge_sup = max(wedge_sup, numeric_wedge_norm(A[p], dA[p, j]))
    d_sup = float(np.max(two_form_matrix_norm(dA))) if dA.size else 0.0
    return wedge_sup, d_sup


def asymptotic_involutivity_trace(frames, dists, eps, points, n_dirs=256,
                                  seed=0, rounds=3):
    """Per-step quantities q_k = ||dA_k|_{E_k}|| ||A_k^{-1}|| e^{eps M_k}.

    Also returns the strong-form surrogate
    max_j |eta_1 ^ .. ^ eta_n ^ d eta_j|_inf * e^{eps max_i |d eta_i|_inf}.
    """
    if len(frames) != len(dists):
        raise ValueError("frame and distribution sequences must align")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = []
    for k, (frame, dist) in enumerate(zip(frames, dists)):
        bases = _as_bases(dist, pts)
        d_restr = sup_d_restricted_norm(frame, bases, pts, n_dirs, seed, rounds)
        inv_norm = sup_inverse_norm(frame, pts)
        m_const = involutivity_constant(frame, bases, pts, n_dirs, seed, rounds)
        q = d_restr.value * inv_norm.value * float(np.exp(eps * m_const.value))
        wedge_sup, d_sup = _strong_involutivity_parts(frame, pts)
        strong = wedge_sup * float(np.exp(eps * d_sup))
        out.append(TraceEntry(k, q, strong, {
            "d_restricted": d_restr.value, "inv_norm": inv_norm.value,
            "M": m_const.value, "wedge_sup": wedge_sup, "d_sup": d_sup,
            "eps": eps}))
    return out


def exterior_regularity_trace(frames, limit, eps, points, n_dirs=256, seed=0,
                              rounds=3):
    """Per-step quantities ||B_k|_E|| ||B_k^{-1}|| e^{eps M_k} against the
    limit distribution E, plus the strong surrogate
    max_j |beta^k_j - beta_j|_inf * e^{eps max_i |d beta^k_i|_inf} when a
    symbolic limit frame is available (limit given as a Distribution)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    bases = _as_bases(limit, pts)
    limit_frame = annihilator_frame(limit) if isinstance(limit, Distribution) \
        else None
    limit_matrix = limit_frame.matrix_at(pts) if limit_frame else None
    out = []
    for k, frame in enumerate(frames):
        restr = sup_frame_restricted_norm(frame, bases, pts)
        inv_norm = sup_inverse_norm(frame, pts)
        m_const = involutivity_constant(frame, bases, pts, n_dirs, seed, rounds)
        q = restr.value * inv_norm.value * float(np.exp(eps * m_const.value))
        strong = None
        dA = frame.d_matrices_at(pts)
        d_sup = float(np.max(two_form_matrix_norm(dA))) if dA.size else 0.0
        if limit_matrix is not None:
            diff = frame.matrix_at(pts) - limit_matrix
            row_sup = float(np.max(np.linalg.norm(diff, axis=2)))
            strong = row_sup * float(np.exp(eps * d_sup))
        out.append(TraceEntry(k, q, strong, {
            "restricted": restr.value, "inv_norm": inv_norm.value,
            "M": m_const.value, "d_sup": d_sup, "eps": eps}))
    return out


def compatibility_defect(frame_a, frame_b, points):
    """max_p | ||A_p o (B_p|_Y)^{-1}|| - 1 | for two frames of one bundle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    A = frame_a.matrix_at(pts)
    _, _, U = _frame_inverse_embedded(frame_b, pts)
    comp = A @ U
    return float(np.max(np.abs(_sigma_max(comp) - 1.0)))
