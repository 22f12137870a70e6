"""Uniqueness diagnostics for continuous ODEs dy/dt = F(t, y).

The extended field (1, F) over xi = (t, y) never vanishes, so a
uniqueness certificate picks the largest nonzero component, takes the
declared modulus of F with respect to the remaining variables as w2 and
the overall declared modulus as w1, and evaluates the limit criterion
w1(s) e^{w2(s)/s} -> 0.

The funnel probe is numerical evidence only: it integrates an ensemble
of vertically perturbed initial conditions together with field-offset
runs F +- delta and watches how the terminal dispersion scales with
delta.  Linear scaling is the unique-like signature; a plateau far above
the smallest probe is the funnel signature.  Forward integration from a
single point cannot exhibit non-uniqueness by itself, which is why the
field-offset probe exists: it brackets the funnel from outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box
from .errors import ContfrobError, EscapeError, EvalDomainError
from .fields import Const, Field, add
from .moduli import (CriterionReport, MaxModulus, Modulus, estimate_modulus,
                     limit_condition_check)
from .surface import FlowConfig, flow

__all__ = [
    "ModuliDecl", "OdeSpec", "FunnelReport", "Theorem1Certificate", "extend",
    "theorem1_check", "funnel", "validate_moduli", "funnel_to_csv",
]

_NONZERO_THRESHOLD = 1.0e-9


@dataclass
class ModuliDecl:
    """Declared regularity: one overall modulus plus per-variable ones."""

    overall: Modulus
    per_variable: dict

    def group_modulus(self, names):
        names = [n for n in names if n in self.per_variable]
        if not names:
            raise KeyError("no declared modulus for the requested variables")
        w = self.per_variable[names[0]]
        for n in names[1:]:
            w = MaxModulus(w, self.per_variable[n])
        return w


@dataclass
class OdeSpec:
    t_name: str
    y_names: tuple
    F: list          # n fields over (t, y_1..y_n)
    domain: Box      # over (t,) + y_names
    moduli: ModuliDecl = None

    def __post_init__(self):
        self.y_names = tuple(self.y_names)
        assert len(self.F) == len(self.y_names)
        assert self.domain.names == self.coords

    @property
    def coords(self):
        return (self.t_name,) + self.y_names

    @property
    def n(self):
        return len(self.y_names)


def extend(spec: OdeSpec):
    """The never-vanishing extended field (1, F^1, ..., F^n) over xi."""
    return [Const(1.0)] + list(spec.F)


@dataclass
class Theorem1Certificate:
    component: int          # 1-based index into xi = (t, y_1..y_n)
    component_value: float
    w1: Modulus
    w2: Modulus
    report: CriterionReport

    @property
    def verdict(self):
        return self.report.verdict


def theorem1_check(spec: OdeSpec, xi, grid=None) -> Theorem1Certificate:
    """Uniqueness certificate at a point of the extended phase space.

    Chooses the largest-magnitude component above 1e-9 (ties break to the
    largest index, i.e. toward the state variables); w2 is the declared
    modulus with respect to every variable except the chosen one.
    """
    xi = np.asarray(xi, dtype=float)
    env = dict(zip(spec.coords, xi))
    values = np.array([f.evaluate(env) for f in extend(spec)], dtype=float)
    nz = np.abs(values) > _NONZERO_THRESHOLD
    if not np.any(nz):
        raise AssertionError("extended field vanished; first component is 1")
    best = np.max(np.abs(values[nz]))
    candidates = [i for i in range(len(values))
                  if nz[i] and abs(values[i]) >= best * (1.0 - 1e-12)]
    chosen = max(candidates)
    others = [c for j, c in enumerate(spec.coords) if j != chosen]
    w2 = spec.moduli.group_modulus(others)
    w1 = spec.moduli.overall
    report = limit_condition_check(w1, w2, grid)
    report.params["component"] = chosen + 1
    report.params["component_value"] = float(values[chosen])
    return Theorem1Certificate(chosen + 1, float(values[chosen]), w1, w2,
                               report)


def validate_moduli(spec: OdeSpec, samples_per_axis=9, factor=2.0):
    """Spot-check declared per-variable moduli against empirical ones.

    Returns {variable: worst ratio empirical/declared}; a declaration is
    admissible when the ratio stays below the factor.
    """
    pts = spec.domain.lattice(samples_per_axis)
    env = {n: pts[:, i] for i, n in enumerate(spec.coords)}
    vals = np.stack([np.broadcast_to(f.evaluate(env), (len(pts),))
                     for f in spec.F], axis=-1)
    norm = np.linalg.norm(vals, axis=-1)
    out = {}
    for i, name in enumerate(spec.coords):
        if name not in spec.moduli.per_variable:
            continue
        try:
            tab = estimate_modulus(pts, norm, direction_mask=[i])
        except ContfrobError:
            continue
        declared = spec.moduli.per_variable[name]
        worst = 0.0
        for s, v in tab.breakpoints:
            if s > declared.domain_cap:
                continue
            ref = declared(s)
            if ref > 0.0:
                worst = max(worst, v / ref)
        out[name] = worst
        if worst > factor:
            raise EvalDomainError(
                f"declared modulus for {name!r} violated by factor {worst:.2f}")
    return out


@dataclass
class FunnelReport:
    basepoint: np.ndarray
    horizon: float
    delta_list: list
    dispersions: list
    verdict: str
    params: dict = field(default_factory=dict)
    escapes: dict = field(default_factory=dict)


def funnel(spec: OdeSpec, xi0, T, delta_list, ensemble=8,
           cfg: FlowConfig = None, seed=0) -> FunnelReport:
    """Perturbation-ensemble probe of the solution funnel through xi0.

    For each delta: integrate from xi0 + delta * (unit vertical vectors)
    and with the field offset by +-delta on every state component; the
    dispersion is the diameter of the terminal points.  Escaped
    trajectories are recorded, not fatal.
    """
    cfg = cfg or FlowConfig(step=1.0e-3)
    delta_list = sorted((float(d) for d in delta_list), reverse=True)
    assert len(delta_list) >= 2 and delta_list[0] > delta_list[-1]
    xi0 = np.asarray(xi0, dtype=float)
    coords = spec.coords
    base_fields = extend(spec)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((ensemble, spec.n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    dispersions, escapes = [], {}
    for delta in delta_list:
        terminals, escaped = [], 0

        def run(fields, start):
            nonlocal escaped
            if not spec.domain.contains(start, tol=1e-12):
                escaped += 1
                return
            try:
                terminals.append(flow(fields, coords, start, T, cfg,
                                      spec.domain))
            except (EscapeError, EvalDomainError):
                escaped += 1

        run(base_fields, xi0)
        for u in dirs:
            start = xi0.copy()
            start[1:] += delta * u
            run(base_fields, start)
        for sign in (+1.0, -1.0):
            offset = [base_fields[0]] + [add(f, Const(sign * delta))
                                         for f in spec.F]
            run(offset, xi0)

        if len(terminals) >= 2:
            pts = np.asarray(terminals)
            diff = pts[:, None, :] - pts[None, :, :]
            dispersions.append(float(np.max(np.linalg.norm(diff, axis=-1))))
        else:
            dispersions.append(0.0)
        escapes[delta] = escaped

    verdict, fit = _classify_dispersion(delta_list, dispersions)
    params = {"ensemble": ensemble, "seed": seed, "T": T,
              "step": cfg.step, "fit_exponent": fit,
              "plateau_floor": 1.0e3 * delta_list[-1]}
    return FunnelReport(xi0, T, delta_list, dispersions, verdict, params,
                        escapes)


def _classify_dispersion(deltas, dispersions):
    """UniqueLike when dispersion ~ delta (exponent >= 0.9); funnel when it
    plateaus above 1e3 times the smallest probe."""
    d = np.asarray(deltas)
    v = np.asarray(dispersions)
    good = v > 0.0
    if np.count_nonzero(good) < 2:
        return "Inconclusive", math.nan
    p = float(np.polyfit(np.log(d[good]), np.log(v[good]), 1)[0])
    plateau_floor = 1.0e3 * d[-1]
    if np.all(v[good] >= plateau_floor) and p < 0.5:
        return "FunnelDetected", p
    if p >= 0.9:
        return "UniqueLike", p
    return "Inconclusive", p


def funnel_to_csv(rep: FunnelReport):
    lines = ["# report=funnel", f"# verdict={rep.verdict}",
             f"# basepoint={','.join(repr(float(v)) for v in rep.basepoint)}",
             f"# horizon={float(rep.horizon)!r}"]
    for k in sorted(rep.params):
        lines.append(f"# param.{k}={rep.params[k]}")
    lines.append("delta,dispersion,escaped")
    for dlt, disp in zip(rep.delta_list, rep.dispersions):
        lines.append(f"{float(dlt)!r},{float(disp)!r},{rep.escapes[dlt]}")
    return "\n".join(lines) + "\n"
