"""Candidate integral surfaces built by composed coordinate flows.

The surface through x0 is W(t_1,...,t_m) = e^{t_m X_m} o ... o e^{t_1 X_1}(x0)
with the composition order fixed (X_1 first); a permuted order is exposed
only as a diagnostic.  Flows are fixed-step RK4 for reproducibility of the
sup-norm diagnostics; tangents come from centered differences of the stored
grid, and the finite-difference error is folded into tolerances as
10 * (grid spacing)^2.

The three quantitative checks:

* tangency_defect compares |dW/dt_i - X_i(W)| per node against
  m*eps1 * ||dA|_E||_inf * ||A^{-1}||_inf * e^{m*eps1*M_A},
* pushforward_bound_check compares a composed variational flow of a
  vertical vector against |A_{x0}(Y)| * ||(A_{x_m}|_Y)^{-1}|| * e^{m*eps1*M_A},
* converge_surfaces runs the Cauchy/angle test on a sequence of patches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box, env_of
from .errors import EscapeError
from .fields import Field
from .geometry import (Distribution, FrameSection, annihilator_frame,
                       involutivity_constant, max_principal_angle,
                       orthonormalize, restricted_inverse,
                       sup_d_restricted_norm, sup_inverse_norm)

__all__ = [
    "FlowConfig", "SurfacePatch", "flow", "variational_flow", "build_surface",
    "tangency_defect", "pushforward_bound_check", "converge_surfaces",
    "TangencyReport", "PushforwardCheck", "ConvergenceReport",
    "patch_to_csv",
]


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1.0e-3
    max_time: float = 10.0
    jacobian_mode: str = "symbolic"  # or "fd"

    def __post_init__(self):
        assert self.step > 0.0
        assert self.jacobian_mode in ("symbolic", "fd")


def _eval_vector(fields, coords, x):
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    env = env_of(coords, pts)
    out = np.empty_like(pts, dtype=float)
    for c, f in enumerate(fields):
        out[:, c] = np.broadcast_to(f.evaluate(env), (len(pts),))
    return out[0] if single else out


def flow(fields, coords, x0, t, cfg: FlowConfig, box: Box = None):
    """RK4 endpoint of the flow of sum_c fields[c] d/dc after time t."""
    if abs(t) > cfg.max_time:
        raise EscapeError("requested time beyond max_time", exit_time=t)
    x = np.asarray(x0, dtype=float).copy()
    if t == 0.0:
        return x
    n_steps = max(1, int(math.ceil(abs(t) / cfg.step - 1e-12)))
    dt = t / n_steps
    for k in range(n_steps):
        x = _rk4_step(fields, coords, x, dt)
        if box is not None and not np.all(box.contains(x, tol=1e-9)):
            raise EscapeError("trajectory left the domain box",
                              exit_time=(k + 1) * dt)
    return x


def _rk4_step(fields, coords, x, dt):
    k1 = _eval_vector(fields, coords, x)
    k2 = _eval_vector(fields, coords, x + 0.5 * dt * k1)
    k3 = _eval_vector(fields, coords, x + 0.5 * dt * k2)
    k4 = _eval_vector(fields, coords, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _jacobian_fields(fields, coords):
    return [[f.diff(c) for c in coords] for f in fields]


def _jacobian_apply(fields, coords, jac, x, v, mode, fd_step=1.0e-6):
    if mode == "symbolic":
        env = env_of(coords, x)
        J = np.array([[jf.evaluate(env) for jf in row] for row in jac],
                     dtype=float)
        return J @ v
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(v)
    u = v / nv
    fp = _eval_vector(fields, coords, x + fd_step * u)
    fm = _eval_vector(fields, coords, x - fd_step * u)
    return nv * (fp - fm) / (2.0 * fd_step)


def variational_flow(fields, coords, x0, t, Y0, cfg: FlowConfig,
                     box: Box = None):
    """Integrate the flow and its linearization: returns (x(t), De^{tX} Y0).

    The variational equation dY/dt = DX(x(t)) Y runs alongside the base
    trajectory in one RK4 step, so the result is linear in Y0 to rounding.
    """
    x = np.asarray(x0, dtype=float).copy()
    Y = np.asarray(Y0, dtype=float).copy()
    if t == 0.0:
        return x, Y
    if abs(t) > cfg.max_time:
        raise EscapeError("requested time beyond max_time", exit_time=t)
    jac = _jacobian_fields(fields, coords) if cfg.jacobian_mode == "symbolic" \
        else None
    n_steps = max(1, int(math.ceil(abs(t) / cfg.step - 1e-12)))
    dt = t / n_steps

    def rhs(state):
        xs, ys = state
        return (_eval_vector(fields, coords, xs),
                _jacobian_apply(fields, coords, jac, xs, ys,
                                cfg.jacobian_mode))

    for k in range(n_steps):
        k1 = rhs((x, Y))
        k2 = rhs((x + 0.5 * dt * k1[0], Y + 0.5 * dt * k1[1]))
        k3 = rhs((x + 0.5 * dt * k2[0], Y + 0.5 * dt * k2[1]))
        k4 = rhs((x + dt * k3[0], Y + dt * k3[1]))
        x = x + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Y = Y + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if box is not None and not np.all(box.contains(x, tol=1e-9)):
            raise EscapeError("trajectory left the domain box",
                              exit_time=(k + 1) * dt)
    return x, Y


@dataclass
class SurfacePatch:
    """Composed-flow surface samples over the parameter cube (-eps1, eps1)^m."""

    coords: tuple
    m: int
    eps1: float
    param_axes: tuple  # m arrays of parameter values, each containing 0
    points: np.ndarray  # (res,)*m + (dim,)
    tangents: np.ndarray  # (m,) + (res,)*m + (dim,)
    x0: np.ndarray
    order: tuple

    @property
    def res(self):
        return len(self.param_axes[0])

    @property
    def spacing(self):
        return float(self.param_axes[0][1] - self.param_axes[0][0])

    def flat_points(self):
        return self.points.reshape(-1, self.points.shape[-1])


def build_surface(dist: Distribution, x0, eps1, grid_res, cfg: FlowConfig,
                  order=None):
    """Compose the spanning flows over a parameter lattice.

    Applies X_{order[0]} first; the written order (X_1 first) is the
    default, a permutation is a diagnostic only.  grid_res must be odd so
    the lattice contains t = 0 and W(0) = x0 is exact by construction.
    """
    if grid_res % 2 == 0:
        raise ValueError("grid_res must be odd so the lattice contains 0")
    if cfg.step > eps1 / 16.0 + 1e-15:
        raise ValueError("flow step must satisfy h <= eps1/16 for builds")
    m = dist.m
    order = tuple(order) if order is not None else tuple(range(m))
    assert sorted(order) == list(range(m))
    x0 = np.asarray(x0, dtype=float)
    fields = dist.spanning_fields()
    axis = np.linspace(-eps1, eps1, grid_res)
    center = grid_res // 2
    dt = axis[1] - axis[0]

    pts = x0[None, :]  # flat list of current-layer points
    shape = ()
    for k in range(m):
        Xi = fields[order[k]]
        new = np.empty((len(pts), grid_res, dist.dim))
        new[:, center] = pts
        for j in range(center + 1, grid_res):
            for p in range(len(pts)):
                try:
                    new[p, j] = flow(Xi, dist.coords, new[p, j - 1], dt, cfg,
                                     dist.domain)
                except EscapeError as err:
                    err.node = (order[k], j)
                    raise
        for j in range(center - 1, -1, -1):
            for p in range(len(pts)):
                try:
                    new[p, j] = flow(Xi, dist.coords, new[p, j + 1], -dt, cfg,
                                     dist.domain)
                except EscapeError as err:
                    err.node = (order[k], j)
                    raise
        shape = shape + (grid_res,)
        pts = new.reshape(-1, dist.dim)

    points = pts.reshape(shape + (dist.dim,))
    # sweep axis k holds parameter t_{order[k]}; transpose to natural order
    points = np.moveaxis(points, list(range(m)), [int(p) for p in order])
    tangents = np.stack([np.gradient(points, dt, axis=i, edge_order=2)
                         for i in range(m)])
    return SurfacePatch(dist.coords, m, eps1, tuple([axis.copy() for _ in
                                                     range(m)]),
                        points, tangents, x0, order)


@dataclass
class TangencyReport:
    defects: np.ndarray  # (m,) + grid shape
    rhs: float
    fd_tol: float
    parts: dict = field(default_factory=dict)

    @property
    def max_defect(self):
        return float(np.max(self.defects))

    @property
    def margin(self):
        return self.rhs + self.fd_tol - self.max_defect

    def ok(self):
        return bool(np.all(self.defects <= self.rhs + self.fd_tol))


def _frame_bound_parts(dist, frame, sup_res, n_dirs, seed):
    pts = dist.domain.lattice(sup_res)
    bases = dist.orthonormal_bases_at(pts)
    d_restr = sup_d_restricted_norm(frame, bases, pts, n_dirs, seed)
    inv_norm = sup_inverse_norm(frame, pts)
    m_const = involutivity_constant(frame, bases, pts, n_dirs, seed)
    return d_restr.value, inv_norm.value, m_const.value


def tangency_defect(patch: SurfacePatch, dist: Distribution, frame=None,
                    sup_res=17, n_dirs=256, seed=0):
    """Per-node, per-direction defect |dW/dt_i - X_i(W)| and its bound."""
    if frame is None:
        frame = annihilator_frame(dist)
    flat = patch.flat_points()
    env = env_of(dist.coords, flat)
    grid_shape = patch.points.shape[:-1]
    defects = np.empty((patch.m,) + grid_shape)
    fields = dist.spanning_fields()
    for i in range(patch.m):
        X = np.stack([np.broadcast_to(f.evaluate(env), (len(flat),))
                      for f in fields[i]], axis=-1)
        diff = patch.tangents[i].reshape(-1, dist.dim) - X
        defects[i] = np.linalg.norm(diff, axis=-1).reshape(grid_shape)

    d_restr, inv_norm, m_const = _frame_bound_parts(dist, frame, sup_res,
                                                    n_dirs, seed)
    rhs = patch.m * patch.eps1 * d_restr * inv_norm * \
        math.exp(patch.m * patch.eps1 * m_const)
    fd_tol = 10.0 * patch.spacing ** 2
    return TangencyReport(defects, rhs, fd_tol, {
        "d_restricted": d_restr, "inv_norm": inv_norm, "M": m_const,
        "m": patch.m, "eps1": patch.eps1, "sup_res": sup_res})


@dataclass
class PushforwardCheck:
    lhs: float
    rhs: float
    passed: bool
    parts: dict = field(default_factory=dict)


def pushforward_bound_check(dist: Distribution, frame: FrameSection, x0,
                            times, Y0, cfg: FlowConfig, m_const=None,
                            sup_res=17, n_dirs=256, seed=0, slack=1.0e-3):
    """Composed variational flow of a vertical vector against its bound."""
    times = np.asarray(times, dtype=float)
    eps1 = float(np.max(np.abs(times))) if len(times) else 0.0
    if m_const is None:
        pts = dist.domain.lattice(sup_res)
        bases = dist.orthonormal_bases_at(pts)
        m_const = involutivity_constant(frame, bases, pts, n_dirs, seed).value
    fields = dist.spanning_fields()
    x = np.asarray(x0, dtype=float)
    Y = np.asarray(Y0, dtype=float)
    for i in range(dist.m):
        x, Y = variational_flow(fields[i], dist.coords, x, float(times[i]), Y,
                                cfg, dist.domain)
    lhs = float(np.linalg.norm(Y))
    A0 = frame.matrix_at(np.asarray(x0, dtype=float)[None])[0]
    _, inv_norm_end = restricted_inverse(frame, x)
    rhs = float(np.linalg.norm(A0 @ np.asarray(Y0, dtype=float))) * \
        inv_norm_end * math.exp(dist.m * eps1 * m_const)
    return PushforwardCheck(lhs, rhs, lhs <= rhs * (1.0 + slack), {
        "M": m_const, "inv_norm_end": inv_norm_end, "eps1": eps1,
        "endpoint": x})


@dataclass
class ConvergenceReport:
    displacements: list
    angles: list
    verdict: str
    limit_index: int
    params: dict = field(default_factory=dict)


def converge_surfaces(patches, limit_dist: Distribution, dists=None,
                      angle_tol=1.0e-3, decay_factor=10.0):
    """Cauchy trace plus tangent-angle trace for a patch sequence.

    Converged   : displacements shrink by >= decay_factor overall (or are
                  identically zero) and the final tangent planes align
                  with the limit distribution within angle_tol.
    NotConverged: the angle trace stays away from zero.
    Inconclusive: decay below the threshold (slow convergence and
                  divergence are indistinguishable at finite depth).
    """
    if len(patches) < 2:
        raise ValueError("need at least two patches")
    shape = patches[0].points.shape
    for p in patches[1:]:
        if p.points.shape != shape or p.res != patches[0].res:
            raise ValueError("patches must share the parameter grid")

    displacements = []
    for a, b in zip(patches, patches[1:]):
        displacements.append(float(np.max(np.linalg.norm(
            b.points - a.points, axis=-1))))

    angles = []
    per_k = dists if dists is not None else [limit_dist] * len(patches)
    for p, dk in zip(patches, per_k):
        flat = p.flat_points()
        tng = np.stack([p.tangents[i].reshape(-1, len(p.coords))
                        for i in range(p.m)], axis=-1)
        t_bases = orthonormalize(tng)
        e_bases = dk.orthonormal_bases_at(flat)
        angles.append(float(np.max(max_principal_angle(t_bases, e_bases))))

    d0, dlast = displacements[0], displacements[-1]
    all_zero = max(displacements) <= 1e-14
    decay_ok = all_zero or dlast <= 1e-14 or d0 / dlast >= decay_factor
    final_angle = angles[-1]
    if decay_ok and final_angle <= angle_tol:
        verdict = "Converged"
    elif final_angle > angle_tol and final_angle >= 0.9 * angles[0]:
        verdict = "NotConverged"
    else:
        verdict = "Inconclusive"
    return ConvergenceReport(displacements, angles, verdict,
                             len(patches) - 1,
                             {"angle_tol": angle_tol,
                              "decay_factor": decay_factor,
                              "final_angle": final_angle})


def patch_to_csv(patch: SurfacePatch, report: TangencyReport = None):
    lines = [f"# m={patch.m}", f"# eps1={float(patch.eps1)!r}",
             f"# order={','.join(str(o) for o in patch.order)}"]
    if report is not None:
        lines.append(f"# rhs={float(report.rhs)!r}")
        lines.append(f"# fd_tol={float(report.fd_tol)!r}")
    header = [f"t{i+1}" for i in range(patch.m)] + list(patch.coords)
    if report is not None:
        header += [f"defect{i+1}" for i in range(patch.m)]
    lines.append(",".join(header))
    grid_shape = patch.points.shape[:-1]
    for idx in np.ndindex(grid_shape):
        row = [repr(float(patch.param_axes[i][idx[i]]))
               for i in range(patch.m)]
        row += [repr(float(v)) for v in patch.points[idx]]
        if report is not None:
            row += [repr(float(report.defects[(i,) + idx]))
                    for i in range(patch.m)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
