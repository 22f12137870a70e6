"""Uniqueness and integrability diagnostics for dy_i/dx_j = F_ij(x, y).

The matrix extension of an n x m right-hand side F adjoins an n x n
identity block: hat(F) = [I_n | F].  Columns pair with variables as
column j <= n -> y_j (the identity block is the y-block of the
annihilator matrix) and column n+j -> x_j; the uniqueness certificate for
a column choice I takes w2 as the declared modulus with respect to those
variables and requires det(hat(F)^I) != 0 at the point.

For the separable family F_ij = G_i(y_i) * dH_i/dx_j solutions exist
through every point and are computed here in closed quadrature form:
int_{y0}^{y} ds/G_i(s) = H_i(x) - H_i(x0), solved by monotone
root-finding on a tabulated antiderivative.  This solver is the oracle
the surface-convergence pipeline is checked against, so it never goes
through the flow machinery.

Smoothing the same family at scale eps gives C^1 frames
eta_i = dy_i - G_i^eps d_x H_i^eps whose top wedge with d(eta) vanishes
structurally (the dy_i repeat and the alpha ^ alpha cancellation);
`involutive_mollified_frames` builds that sequence and asserts it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .boxes import Box, env_of
from .errors import BranchCrossingError, EvalDomainError
from .fields import Const, Field, add, mul, neg
from .forms import one_form
from .geometry import Distribution, FrameSection, frobenius_defect
from .moduli import CriterionReport, limit_condition_check
from .mollify import grid_from_field, mollify, to_spline_field
from .odelab import ModuliDecl, OdeSpec

__all__ = [
    "PdeSpec", "SpecialFormSpec", "HatMatrix", "hat_matrix", "submatrix_det",
    "theorem2_check", "Theorem2Certificate", "special_solve", "SolveResult",
    "involutive_mollified_frames", "MollifiedFamily", "pde_spec_from_ode",
]

_NONZERO_THRESHOLD = 1.0e-9


@dataclass
class PdeSpec:
    x_names: tuple
    y_names: tuple
    F: list          # F[i][j]: field for dy_i/dx_j over (x, y)
    domain: Box      # over x_names + y_names
    moduli: ModuliDecl = None

    def __post_init__(self):
        self.x_names = tuple(self.x_names)
        self.y_names = tuple(self.y_names)
        assert len(self.F) == self.n
        assert all(len(row) == self.m for row in self.F)
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

    def distribution(self):
        """Spanning fields X_j = d/dx_j + sum_i F_ij d/dy_i."""
        coeffs = [[self.F[i][j] for i in range(self.n)]
                  for j in range(self.m)]
        return Distribution(self.x_names, self.y_names, coeffs, self.domain)


def pde_spec_from_ode(spec: OdeSpec) -> PdeSpec:
    """View an ODE as the m = 1 case (x_1 is the time variable)."""
    F = [[f] for f in spec.F]
    return PdeSpec((spec.t_name,), spec.y_names, F, spec.domain, spec.moduli)


@dataclass
class HatMatrix:
    """n x (n+m) extension [I_n | F] with its column-variable pairing."""

    spec: PdeSpec
    fields: list  # n rows, n+m columns

    @property
    def shape(self):
        return (self.spec.n, self.spec.n + self.spec.m)

    def column_variable(self, j):
        """Variable paired with 1-based column j: y-block first, then x."""
        n = self.spec.n
        if 1 <= j <= n:
            return self.spec.y_names[j - 1]
        return self.spec.x_names[j - n - 1]

    def evaluate(self, xi):
        env = dict(zip(self.spec.coords, np.asarray(xi, dtype=float)))
        return np.array([[f.evaluate(env) for f in row]
                         for row in self.fields], dtype=float)


def hat_matrix(spec: PdeSpec) -> HatMatrix:
    n = spec.n
    rows = []
    for i in range(n):
        row = [Const(1.0) if i == j else Const(0.0) for j in range(n)]
        row += list(spec.F[i])
        rows.append(row)
    return HatMatrix(spec, rows)


def submatrix_det(hat: HatMatrix, I):
    """Column submatrix for a 1-based strictly increasing index list, with
    its exact symbolic determinant."""
    n, total = hat.shape
    I = tuple(int(i) for i in I)
    if len(I) != n or sorted(set(I)) != list(I) or I[0] < 1 or I[-1] > total:
        raise ValueError(f"index list must pick {n} distinct columns "
                         f"in 1..{total}")
    cols = [i - 1 for i in I]
    sub = [[hat.fields[r][c] for c in cols] for r in range(n)]
    terms = []
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for a in range(n) for b in range(a + 1, n)
                         if perm[a] > perm[b])
        prod = mul(*(sub[r][perm[r]] for r in range(n)))
        terms.append(prod if inversions % 2 == 0 else neg(prod))
    return sub, add(*terms)


@dataclass
class Theorem2Certificate:
    columns: tuple
    det_value: float
    w1: object
    w2: object
    report: CriterionReport = None

    @property
    def verdict(self):
        return self.report.verdict if self.report else "NotApplicable"


def theorem2_check(spec: PdeSpec, xi, I, grid=None) -> Theorem2Certificate:
    """Uniqueness certificate from an invertible column choice of [I_n | F]."""
    hat = hat_matrix(spec)
    _, det = submatrix_det(hat, I)
    env = dict(zip(spec.coords, np.asarray(xi, dtype=float)))
    det_val = float(det.evaluate(env))
    if abs(det_val) <= _NONZERO_THRESHOLD:
        return Theorem2Certificate(tuple(I), det_val, None, None, None)
    variables = [hat.column_variable(j) for j in I]
    w2 = spec.moduli.group_modulus(variables)
    w1 = spec.moduli.overall
    report = limit_condition_check(w1, w2, grid)
    report.params["columns"] = ",".join(str(j) for j in I)
    report.params["det"] = det_val
    return Theorem2Certificate(tuple(I), det_val, w1, w2, report)


# ---------------------------------------------------------------------------
# separable special form


@dataclass
class SpecialFormSpec:
    """F_ij(x, y) = G_i(y_i) * dH_i/dx_j(x)."""

    x_names: tuple
    y_names: tuple
    G: list   # G[i]: field of the single variable y_i
    H: list   # H[i]: field over the x variables
    domain: Box

    def __post_init__(self):
        self.x_names = tuple(self.x_names)
        self.y_names = tuple(self.y_names)
        assert len(self.G) == len(self.H) == self.n
        for i, g in enumerate(self.G):
            assert g.free_vars <= {self.y_names[i]}, \
                "G_i may only depend on y_i"
        for h in self.H:
            assert h.free_vars <= set(self.x_names)

    @property
    def m(self):
        return len(self.x_names)

    @property
    def n(self):
        return len(self.y_names)

    @property
    def coords(self):
        return self.x_names + self.y_names

    def induced_F(self):
        return [[mul(self.G[i], self.H[i].diff(xj))
                 for xj in self.x_names] for i in range(self.n)]

    def pde_spec(self, moduli=None) -> PdeSpec:
        return PdeSpec(self.x_names, self.y_names, self.induced_F(),
                       self.domain, moduli)

    def matches(self, pde: PdeSpec, points, tol=1.0e-12):
        """Pointwise agreement of the induced right-hand side with a spec."""
        env = env_of(self.coords, np.atleast_2d(points))
        mine = self.induced_F()
        for i in range(self.n):
            for j in range(self.m):
                a = np.asarray(mine[i][j].evaluate(env), dtype=float)
                b = np.asarray(pde.F[i][j].evaluate(env), dtype=float)
                if np.max(np.abs(a - b)) > tol:
                    return False
        return True


@dataclass
class SolveResult:
    targets: np.ndarray        # (T, m)
    values: np.ndarray         # (T, n)
    residuals: np.ndarray      # (T, n, m) FD residual dy/dx - F
    params: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals))) if self.residuals.size \
            else 0.0


class _SeparableComponent:
    """Tabulated antiderivative Phi(y) = int_{y0}^y ds/G(s) on the branch
    of y0, with monotone inversion."""

    _ZERO_TOL = 1.0e-12

    def __init__(self, g_field, y_name, y0, y_lo, y_hi, n_grid=4001):
        self.y0 = float(y0)
        g0 = float(g_field.evaluate({y_name: self.y0}))
        self.constant = abs(g0) < self._ZERO_TOL
        if self.constant:
            return
        self.sign = math.copysign(1.0, g0)
        ys = np.linspace(y_lo, y_hi, n_grid)
        gs = np.broadcast_to(np.asarray(g_field.evaluate({y_name: ys}),
                                        dtype=float), ys.shape)
        # restrict to the maximal same-sign interval containing y0
        ok = self.sign * gs > self._ZERO_TOL
        i0 = int(np.searchsorted(ys, self.y0))
        i0 = min(max(i0, 0), n_grid - 1)
        lo = i0
        while lo > 0 and ok[lo - 1]:
            lo -= 1
        hi = i0
        while hi < n_grid - 1 and ok[hi + 1]:
            hi += 1
        self.ys = ys[lo:hi + 1]
        if len(self.ys) < 8:
            raise BranchCrossingError("denominator branch around y0 is "
                                      "too narrow to tabulate")
        inv = 1.0 / gs[lo:hi + 1]
        phi = _cumulative_quadrature(self.ys, inv)
        phi -= np.interp(self.y0, self.ys, phi)
        self.phi = CubicSpline(self.ys, phi)
        self.phi_min = float(min(phi[0], phi[-1]))
        self.phi_max = float(max(phi[0], phi[-1]))

    def solve(self, delta_h):
        """y with Phi(y) = delta_h, on the branch of y0."""
        if self.constant:
            return self.y0
        if delta_h == 0.0:
            return self.y0
        if not (self.phi_min - 1e-14 <= delta_h <= self.phi_max + 1e-14):
            raise BranchCrossingError(
                "target lies beyond the branch of the denominator "
                "(it vanishes, or the domain box ends, before the "
                "required displacement)")
        delta_h = min(max(delta_h, self.phi_min), self.phi_max)
        f = lambda yv: float(self.phi(yv)) - delta_h
        a, b = self.ys[0], self.ys[-1]
        return float(brentq(f, a, b, xtol=1.0e-12, rtol=8.9e-16))


def _cumulative_quadrature(xs, vals):
    """Cumulative Simpson-type integral on a uniform grid."""
    h = xs[1] - xs[0]
    out = np.zeros_like(vals)
    # composite trapezoid corrected to Simpson accuracy via end derivatives
    out[1:] = np.cumsum(0.5 * h * (vals[1:] + vals[:-1]))
    # fourth-order end correction (Euler-Maclaurin first term)
    dv = np.gradient(vals, h)
    out[1:] -= (h ** 2 / 12.0) * (dv[1:] - dv[0])
    return out


def special_solve(sf: SpecialFormSpec, x0, y0, targets, fd_step=1.0e-5,
                  residual_check=True):
    """Solve the separable system through (x0, y0) at the target x points.

    Per component: int_{y0_i}^{y_i} ds/G_i = H_i(x) - H_i(x0), inverted by
    monotone root-finding on a tabulated antiderivative; components with
    G_i(y0_i) = 0 stay constant (equilibrium branch).
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n, m = sf.n, sf.m
    y_bounds = [(sf.domain.lows[m + i], sf.domain.highs[m + i])
                for i in range(n)]
    comps = [_SeparableComponent(sf.G[i], sf.y_names[i], y0[i],
                                 *y_bounds[i]) for i in range(n)]
    h_at = [lambda xv, hf=sf.H[i]: float(hf.evaluate(
        dict(zip(sf.x_names, xv)))) for i in range(n)]
    h0 = [h_at[i](x0) for i in range(n)]

    def solve_at(xv):
        return np.array([comps[i].solve(h_at[i](xv) - h0[i])
                         for i in range(n)])

    values = np.array([solve_at(xv) for xv in targets])
    residuals = np.zeros((len(targets), n, m))
    if residual_check:
        env_names = sf.coords
        for t, xv in enumerate(targets):
            for j in range(m):
                xp, xm = xv.copy(), xv.copy()
                xp[j] += fd_step
                xm[j] -= fd_step
                dy = (solve_at(xp) - solve_at(xm)) / (2.0 * fd_step)
                env = dict(zip(env_names, np.concatenate([xv, values[t]])))
                for i in range(n):
                    residuals[t, i, j] = dy[i] - float(
                        mul(sf.G[i], sf.H[i].diff(sf.x_names[j]))
                        .evaluate(env))
    return SolveResult(targets, values, residuals,
                       {"fd_step": fd_step, "x0": x0, "y0": y0})


# ---------------------------------------------------------------------------
# mollified involutive frames


@dataclass
class MollifiedFamily:
    eps: float
    frame: FrameSection
    distribution: Distribution
    g_smooth: list
    h_smooth: list
    wedge_sup: float


def involutive_mollified_frames(sf: SpecialFormSpec, eps_list, pad=None,
                                cells_per_radius=10, check_res=5,
                                wedge_tol=1.0e-10):
    """Smooth G_i and H_i at each scale and build eta_i = dy_i - G_i d_x H_i.

    The top wedge eta_1 ^ ... ^ eta_n ^ d eta_l collapses structurally
    (repeated dy_l and alpha_l ^ alpha_l), which is asserted numerically
    on a lattice at every scale.
    """
    eps_list = [float(e) for e in eps_list]
    pad = pad if pad is not None else max(eps_list) * 1.05
    m, n = sf.m, sf.n
    x_box = Box(sf.x_names, sf.domain.lows[:m], sf.domain.highs[:m])
    families = []
    for eps in eps_list:
        h = eps / cells_per_radius
        xpad = Box(sf.x_names,
                   tuple(lo - pad for lo in x_box.lows),
                   tuple(hi + pad for hi in x_box.highs))
        nx = [int(math.ceil((hi - lo) / h)) + 1
              for lo, hi in zip(xpad.lows, xpad.highs)]
        h_smooth = []
        for i in range(n):
            g = grid_from_field(sf.H[i], xpad, nx)
            h_smooth.append(to_spline_field(mollify(g, eps), sf.x_names,
                                            label=f"H{i+1}e"))
        g_smooth = []
        for i in range(n):
            lo = sf.domain.lows[m + i] - pad
            hi = sf.domain.highs[m + i] + pad
            ybox = Box((sf.y_names[i],), (lo,), (hi,))
            ny = int(math.ceil((hi - lo) / h)) + 1
            g = grid_from_field(sf.G[i], ybox, ny)
            g_smooth.append(to_spline_field(mollify(g, eps),
                                            (sf.y_names[i],),
                                            label=f"G{i+1}e"))
        rows, coeffs = [], [[None] * n for _ in range(m)]
        for i in range(n):
            comps = {sf.y_names[i]: Const(1.0)}
            for j, xn in enumerate(sf.x_names):
                a_ij = mul(g_smooth[i], h_smooth[i].diff(xn))
                comps[xn] = neg(a_ij)
                coeffs[j][i] = a_ij
            rows.append(one_form(sf.coords, comps))
        frame = FrameSection(tuple(rows), sf.coords, sf.y_names, sf.domain)
        dist = Distribution(sf.x_names, sf.y_names, coeffs, sf.domain)
        wedge_sup = float(np.max(frobenius_defect(
            frame, sf.domain.lattice(check_res))))
        if wedge_sup > wedge_tol:
            raise EvalDomainError(
                f"structural involutivity violated: wedge sup {wedge_sup:g}")
        families.append(MollifiedFamily(eps, frame, dist, g_smooth, h_smooth,
                                        wedge_sup))
    return families
