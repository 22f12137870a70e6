"""Dominated-splitting laboratory on torus maps.

Plane fields are transported by pullback, E_k(p) = Dphi^{-k} E_0(phi^k p),
with re-orthonormalization every step (raw jacobian products overflow in
conditioning long before they overflow in magnitude).  Domination reports
compare sup ||Dphi^k|_{E_k}|| against inf m(Dphi^k|_F) with the conorm
computed as the smallest singular value of the restriction, fit the
linear-growth envelope ||Dphi^k|_E|| <= kC + D, and evaluate the decay
quantity  ||Dphi^k|_E||^2 / m(Dphi^k|_F) * e^{eps ||Dphi^k|_E||}.

Pullback frames (phi^k)^* C_0 of a constant orthonormal annihilator frame
are exact annihilators of the transported plane field; their exterior
derivative is the pullback of dC_0, so it is computed pointwise from the
base frame's symbolic derivative and jacobian products, never from
composed expression trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import env_of
from .errors import ConeError, DegenerateSubspaceError
from .fields import Field
from .forms import KForm
from .geometry import (FrameSection, max_principal_angle, orthonormalize)

__all__ = [
    "DiffeoSpec", "PlaneFieldSamples", "SplittingReport", "PullbackFrame",
    "transport", "domination_report", "orthonormal_pullback_frames",
    "splitting_involutivity_pipeline", "splitting_report_to_csv",
]


@dataclass
class DiffeoSpec:
    """Expression-backed diffeomorphism, optionally torus-periodic."""

    coords: tuple
    forward: list       # fields for phi
    inverse: list       # fields for phi^{-1}
    torus: bool = True

    def __post_init__(self):
        self.coords = tuple(self.coords)
        assert len(self.forward) == len(self.inverse) == self.dim
        self._jac_fwd = [[f.diff(c) for c in self.coords]
                         for f in self.forward]
        self._jac_inv = [[f.diff(c) for c in self.coords]
                         for f in self.inverse]

    @property
    def dim(self):
        return len(self.coords)

    def inverted(self):
        """The inverse map as a DiffeoSpec (pullback under it = pushforward)."""
        return DiffeoSpec(self.coords, self.inverse, self.forward, self.torus)

    def _wrap(self, pts):
        return np.mod(pts, 1.0) if self.torus else pts

    def apply(self, pts, k=1):
        """phi^k pointwise; negative k uses the inverse map."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
        fields = self.forward if k >= 0 else self.inverse
        for _ in range(abs(k)):
            env = env_of(self.coords, pts)
            new = np.stack([np.broadcast_to(f.evaluate(env), (len(pts),))
                            for f in fields], axis=-1)
            pts = self._wrap(new)
        return pts

    def jacobian(self, pts, inverse=False):
        """(N, d, d) jacobians of phi (or phi^{-1}) at the points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        env = env_of(self.coords, self._wrap(pts))
        jac = self._jac_inv if inverse else self._jac_fwd
        out = np.empty((len(pts), self.dim, self.dim))
        for r in range(self.dim):
            for c in range(self.dim):
                out[:, r, c] = np.broadcast_to(jac[r][c].evaluate(env),
                                               (len(pts),))
        return out

    def check_inverse(self, pts, tol=1.0e-8):
        round_trip = self.apply(self.apply(pts, 1), -1)
        diff = np.abs(round_trip - self._wrap(np.atleast_2d(pts)))
        if self.torus:
            diff = np.minimum(diff, 1.0 - diff)
        return float(np.max(diff)) <= tol

    def orbit(self, pts, k):
        """[p, phi(p), ..., phi^k(p)]: shape (k+1, N, d)."""
        pts = self._wrap(np.atleast_2d(np.asarray(pts, dtype=float)))
        out = [pts]
        for _ in range(k):
            out.append(self.apply(out[-1], 1))
        return np.stack(out)


@dataclass
class PlaneFieldSamples:
    points: np.ndarray   # (N, d)
    bases: np.ndarray    # (N, d, r) orthonormal

    @property
    def rank(self):
        return self.bases.shape[-1]


def transport(phi: DiffeoSpec, e0_bases, k, points):
    """Pull back a plane field: E_k(p) = Dphi^{-k}(E_0 at phi^k(p)).

    e0_bases: (d, r) constant or callable points -> (N, d, r).
    Re-orthonormalizes after every jacobian inversion step.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    orbit = phi.orbit(points, k)
    if callable(e0_bases):
        B = np.asarray(e0_bases(orbit[k]), dtype=float)
    else:
        e0 = np.asarray(e0_bases, dtype=float)
        B = np.broadcast_to(e0, (len(points),) + e0.shape).copy()
    B = orthonormalize(B)
    for j in range(k - 1, -1, -1):
        J = phi.jacobian(orbit[j])  # Dphi at phi^j(p)
        try:
            B = np.linalg.solve(J, B)
            B = orthonormalize(B)
        except (np.linalg.LinAlgError, DegenerateSubspaceError) as err:
            raise ConeError(f"transversality lost at step {j}: {err}",
                            point=points[0]) from None
    return PlaneFieldSamples(points, B)


def _restricted_product_norms(phi, points, bases, k):
    """sigma_max and sigma_min of Dphi^k restricted to span(bases)."""
    orbit = phi.orbit(points, k)
    M = bases.copy()
    for j in range(k):
        M = phi.jacobian(orbit[j]) @ M
    s = np.linalg.svd(M, compute_uv=False)
    return s[:, 0], s[:, -1]


@dataclass
class SplittingReport:
    k_values: list
    norm_E: list         # sup ||Dphi^k|_{E_k}||
    conorm_F: list       # inf m(Dphi^k|_F)
    growth_C: float
    growth_D: float
    growth_residual: float
    q: dict              # eps -> list of q_k
    dominated: bool
    angles: list = None  # angle(E_k, E_{k+1}) sup, when transported
    vertical_C: float = math.nan
    params: dict = field(default_factory=dict)


def domination_report(phi: DiffeoSpec, e0_bases, f_samples, k_max, points,
                      eps_list=(0.1, 0.5, 1.0),
                      y_indices=None) -> SplittingReport:
    """Domination, linear-growth fit, and decay quantities up to k_max.

    e0_bases seeds the pulled-back family E_k; f_samples is the sampled
    complementary bundle (fixed per point).  The decay quantity per step
    is ||Dphi^k|_{E_k}||^2 / m(Dphi^k|_F) * e^{eps ||Dphi^k|_{E_k}||}.
    When y_indices names the vertical coordinate axes, vertical_C is the
    empirical minimum of |Dphi^k v| / m(Dphi^k|_F) over unit vertical v,
    the fitted value of the existential comparison constant.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f_bases = f_samples.bases if isinstance(f_samples, PlaneFieldSamples) \
        else np.broadcast_to(np.asarray(f_samples, dtype=float),
                             (len(points), phi.dim,
                              np.asarray(f_samples).shape[-1]))
    y_bases = None
    if y_indices is not None:
        y_bases = np.zeros((len(points), phi.dim, len(y_indices)))
        for c, idx in enumerate(y_indices):
            y_bases[:, idx, c] = 1.0
    ks = list(range(1, k_max + 1))
    norm_E, conorm_F, angles = [], [], []
    vertical_C = math.inf if y_bases is not None else math.nan
    prev = None
    for k in ks:
        ek = transport(phi, e0_bases, k, points)
        top, _ = _restricted_product_norms(phi, points, ek.bases, k)
        norm_E.append(float(np.max(top)))
        _, bot = _restricted_product_norms(phi, points, f_bases, k)
        conorm_F.append(float(np.min(bot)))
        if y_bases is not None:
            _, y_min = _restricted_product_norms(phi, points, y_bases, k)
            vertical_C = min(vertical_C, float(np.min(y_min / bot)))
        if prev is not None:
            angles.append(float(np.max(max_principal_angle(prev, ek.bases))))
        prev = ek.bases

    A = np.stack([np.asarray(ks, dtype=float), np.ones(len(ks))], axis=1)
    sol, *_ = np.linalg.lstsq(A, np.asarray(norm_E), rcond=None)
    resid = float(np.max(np.abs(A @ sol - np.asarray(norm_E))))
    q = {}
    for eps in eps_list:
        q[eps] = [nE ** 2 / cF * math.exp(eps * nE)
                  for nE, cF in zip(norm_E, conorm_F)]
    dominated = norm_E[0] < conorm_F[0]
    return SplittingReport(ks, norm_E, conorm_F, float(sol[0]), float(sol[1]),
                           resid, q, dominated, angles, vertical_C,
                           {"points": len(points), "eps_list": list(eps_list)})


class PullbackFrame:
    """(phi^k)^* C_0 for a frame C_0 with field components.

    Implements the same pointwise interface as FrameSection: the matrix
    is C_0(phi^k p) Dphi^k_p and the derivative matrices are the pullback
    of dC_0 (zero when C_0 is constant), evaluated with jacobian products
    rather than composed expression trees.
    """

    def __init__(self, phi: DiffeoSpec, base: FrameSection, k: int):
        self.phi = phi
        self.base = base
        self.k = int(k)
        self.coords = base.coords
        self.y_names = base.y_names

    @property
    def n(self):
        return self.base.n

    @property
    def dim(self):
        return len(self.coords)

    @property
    def y_indices(self):
        return tuple(self.coords.index(y) for y in self.y_names)

    def _jac_power(self, points):
        orbit = self.phi.orbit(points, self.k)
        J = np.broadcast_to(np.eye(self.dim),
                            (len(points), self.dim, self.dim)).copy()
        for j in range(self.k):
            J = self.phi.jacobian(orbit[j]) @ J
        return orbit[self.k], J

    def matrix_at(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        end, J = self._jac_power(pts)
        C = self.base.matrix_at(end)
        return C @ J

    def d_matrices_at(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        end, J = self._jac_power(pts)
        dC = self.base.d_matrices_at(end)  # (N, n, d, d)
        return np.einsum("pca,pjcd,pdb->pjab", J, dC, J)


def orthonormal_pullback_frames(phi: DiffeoSpec, base: FrameSection, k,
                                check_points=None, tol=1.0e-8):
    """Frames (phi^j)^* C_0 for j = 0..k from an orthonormal base frame."""
    if check_points is not None:
        M = base.matrix_at(check_points)
        gram = M @ np.swapaxes(M, 1, 2)
        if np.max(np.abs(gram - np.eye(base.n))) > tol:
            raise ValueError("base frame rows are not orthonormal")
    return [PullbackFrame(phi, base, j) for j in range(k + 1)]


def splitting_involutivity_pipeline(phi: DiffeoSpec, e0_bases,
                                    base_frame: FrameSection, f_samples,
                                    k_max, eps, points, limit=None,
                                    n_dirs=64, seed=0):
    """Assemble pullback frames and transported fields, run both traces.

    Requires domination on the lattice; returns (report, asymptotic
    trace, exterior-regularity trace) where the regularity trace needs a
    limit plane field (samples) to restrict against.
    """
    from .geometry import (asymptotic_involutivity_trace,
                           exterior_regularity_trace)
    y_indices = [base_frame.coords.index(y) for y in base_frame.y_names]
    report = domination_report(phi, e0_bases, f_samples, k_max, points,
                               eps_list=(eps,), y_indices=y_indices)
    if not report.dominated:
        return report, None, None
    frames = [PullbackFrame(phi, base_frame, k) for k in range(1, k_max + 1)]
    dists = [transport(phi, e0_bases, k, points).bases
             for k in range(1, k_max + 1)]
    asym = asymptotic_involutivity_trace(frames, dists, eps, points,
                                         n_dirs=n_dirs, seed=seed)
    ext = None
    if limit is not None:
        lim_bases = limit.bases if isinstance(limit, PlaneFieldSamples) \
            else limit
        ext = exterior_regularity_trace(frames, lim_bases, eps, points,
                                        n_dirs=n_dirs, seed=seed)
    return report, asym, ext


def splitting_report_to_csv(rep: SplittingReport):
    lines = ["# report=splitting",
             f"# dominated={rep.dominated}",
             f"# growth_C={rep.growth_C!r}",
             f"# growth_D={rep.growth_D!r}",
             f"# growth_residual={rep.growth_residual!r}",
             f"# vertical_C={rep.vertical_C!r}"]
    for k in sorted(rep.params):
        lines.append(f"# param.{k}={rep.params[k]}")
    eps_cols = sorted(rep.q)
    header = ["k", "norm_E", "conorm_F"] + [f"q_eps{e}" for e in eps_cols]
    if rep.angles:
        header.append("angle_to_next")
    lines.append(",".join(header))
    for i, k in enumerate(rep.k_values):
        row = [str(k), repr(float(rep.norm_E[i])),
               repr(float(rep.conorm_F[i]))]
        row += [repr(float(rep.q[e][i])) for e in eps_cols]
        if rep.angles:
            row.append(repr(float(rep.angles[i])) if i < len(rep.angles)
                       else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
