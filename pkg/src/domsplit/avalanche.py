"""Avalanche-principle hypotheses, the exact telescoping identity, and the
residual bound, with the supporting norm-to-angle relations as predicates.

Norm products and ratios stay in the log domain throughout: residual grids
up to n ~ 50 at gap parameters ~ 1e4 would otherwise overflow intermediate
pairwise comparisons in edge generators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

from .cocycle import MatrixSequence, backward_scan, forward_scan
from .errors import Degenerate, WindowExceeded
from .matrix2c import Mat2C, mul, singular_values, svd2
from .projective import dist, expanding_image, most_contracted

NEG_INF = float("-inf")

# Envelope constant for |ratio - angle| in norm_angle_gap: the discrepancy
# is carried by the three off-diagonal terms of the twisted product, which a
# crude triangle inequality keeps below 8x the worst gap ratio.
ANGLE_ENVELOPE = 8.0
# Default residual envelope C in residual <= C * n * mu^(-1/2); empirical.
RESIDUAL_ENVELOPE = 5.0


def _log_sigma1(m: Mat2C) -> float:
    s1, _ = singular_values(m)
    return math.log(s1)


def _pair_log_norm(seq: MatrixSequence, j: int) -> float:
    """log sigma1(B(j+1) B(j))."""
    return _log_sigma1(mul(seq[j + 1], seq[j]))


def ap_conditions(seq: MatrixSequence, mu: float) -> tuple[float, float, bool]:
    """Worst single-step gap ratio and pairwise norm-product ratio.

    Returns (ap3_worst, ap4_worst, pass) where pass requires
    ap3_worst <= 1/mu and ap4_worst <= mu^(1/4).
    """
    if mu <= 1.0:
        raise ValueError("mu must exceed 1")
    lo, hi = seq.window
    ap3_log = NEG_INF
    ap4_log = NEG_INF
    for j in range(lo, hi + 1):
        s1, s2 = singular_values(seq[j])
        r = math.log(s2) - math.log(s1) if s2 > 0.0 else NEG_INF
        ap3_log = max(ap3_log, r)
    for j in range(lo, hi):
        r = _log_sigma1(seq[j + 1]) + _log_sigma1(seq[j]) - _pair_log_norm(seq, j)
        ap4_log = max(ap4_log, r)
    ok = ap3_log <= -math.log(mu) and ap4_log <= 0.25 * math.log(mu)
    return math.exp(ap3_log), math.exp(ap4_log), ok


def telescoping_residual(seq: MatrixSequence, j: int, n: int) -> float:
    """|LHS - RHS| of the exact norm telescoping identity.

    log sigma1(B_n(j)) equals the sum of single-step log norms plus the sum
    of pairwise correction terms log[sigma1(B(j+k) B_k(j)) /
    (sigma1(B(j+k)) sigma1(B_k(j)))]; this holds for arbitrary sequences, so
    the returned value is pure floating-point error of the product engine.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if j < seq.lo or j + n - 1 > seq.hi:
        raise WindowExceeded(f"[{j}, {j + n - 1}] not inside [{seq.lo}, {seq.hi}]")
    prods = list(forward_scan(seq, j, n))
    lhs = prods[n].log_sigma1
    single = sum(_log_sigma1(seq[j + k]) for k in range(n))
    correction = 0.0
    for k in range(1, n):
        pk = prods[k]
        step = pk.log_scale + _log_sigma1(mul(seq[j + k], pk.core))
        correction += step - _log_sigma1(seq[j + k]) - pk.log_sigma1
    return abs(lhs - (single + correction))


def ap_residual(seq: MatrixSequence, j: int, n: int) -> float:
    """The avalanche residual |log||B_n|| + sum log||B(j+k)|| - sum log||pairs|||.

    Defined for n >= 3 (the hypotheses only control chains of that length).
    """
    if n < 3:
        raise ValueError("avalanche residual needs n >= 3")
    if j < seq.lo or j + n - 1 > seq.hi:
        raise WindowExceeded(f"[{j}, {j + n - 1}] not inside [{seq.lo}, {seq.hi}]")
    prods = list(forward_scan(seq, j, n))
    lhs = prods[n].log_sigma1
    mids = sum(_log_sigma1(seq[j + k]) for k in range(1, n - 1))
    pairs = sum(_pair_log_norm(seq, j + k) for k in range(0, n - 1))
    return abs(lhs + mids - pairs)


def norm_angle_gap(e1: Mat2C, e2: Mat2C) -> tuple[float, float, float]:
    """(ratio, angle, discrepancy) for the product norm vs. axis alignment.

    ratio = sigma1(e2 e1) / (sigma1(e2) sigma1(e1)); angle is half the
    chordal distance d(s(e2), u(e1)) - i.e. |sin| of the principal angle
    between the contracted axis of e2 and the expanding image of e1, which
    equals |(V*(e2) U(e1))_11| exactly.  When both factors have strong gaps
    the discrepancy |ratio - angle| stays below ANGLE_ENVELOPE times the
    worse gap ratio.
    """
    sv1 = svd2(e1)
    sv2 = svd2(e2)
    if sv1.degenerate or sv2.degenerate:
        raise Degenerate("norm-angle comparison needs non-degenerate factors")
    ratio = math.exp(
        _log_sigma1(mul(e2, e1)) - math.log(sv2.sigma1) - math.log(sv1.sigma1)
    )
    angle = 0.5 * dist(most_contracted(sv2), expanding_image(sv1))
    return ratio, angle, abs(ratio - angle)


def unitary_overlap(e1: Mat2C, e2: Mat2C) -> float:
    """|(V*(e2) U(e1))_11|: the exact half-distance d(s(e2), u(e1)) / 2."""
    sv1 = svd2(e1)
    sv2 = svd2(e2)
    v1 = sv2.v_column(0)
    u1 = sv1.u_column(0)
    return abs(v1[0].conjugate() * u1[0] + v1[1].conjugate() * u1[1])


@dataclass(frozen=True)
class DriftTables:
    """Consecutive direction drifts d(s_n, s_{n-1}), d(u_n, u_{n-1}) at a site."""

    s_steps: dict[int, float]
    u_steps: dict[int, float]
    rate_s: float | None
    rate_u: float | None


# Chordal distances below this are rounding noise (diameter is 2); they are
# excluded from decay-rate fits so a converged plateau cannot flatten them.
DRIFT_NOISE_FLOOR = 1e-13


def _drift_rate(steps: dict[int, float]) -> float | None:
    pts = [(n, math.log(d)) for n, d in steps.items() if d > DRIFT_NOISE_FLOOR]
    if len(pts) < 2:
        return None
    xbar = sum(n for n, _ in pts) / len(pts)
    ybar = sum(y for _, y in pts) / len(pts)
    sxx = sum((n - xbar) ** 2 for n, _ in pts)
    if sxx == 0.0:
        return None
    return sum((n - xbar) * (y - ybar) for n, y in pts) / sxx


def direction_drift(seq: MatrixSequence, j: int, n_max: int) -> DriftTables:
    """Per-n drift of the contracted/expanding directions at site j."""
    n_s = min(n_max, seq.hi - j + 1)
    n_u = min(n_max, j - seq.lo)
    s_steps: dict[int, float] = {}
    u_steps: dict[int, float] = {}

    prev = None
    for n, prod in enumerate(forward_scan(seq, j, n_s)):
        if n == 0:
            continue
        sv = prod.svd()
        cur = None if sv.degenerate else most_contracted(sv)
        if cur is not None and prev is not None:
            s_steps[n] = dist(cur, prev)
        prev = cur
    prev = None
    for n, prod in enumerate(backward_scan(seq, j, n_u)):
        if n == 0:
            continue
        sv = prod.svd()
        cur = None if sv.degenerate else expanding_image(sv)
        if cur is not None and prev is not None:
            u_steps[n] = dist(cur, prev)
        prev = cur
    return DriftTables(s_steps, u_steps, _drift_rate(s_steps), _drift_rate(u_steps))


@dataclass(frozen=True)
class ApReport:
    """Avalanche audit: hypothesis margins, residual grid, and envelope fit."""

    mu: float
    ap3_worst: float
    ap4_worst: float
    conditions_pass: bool
    residuals: dict[tuple[int, int], float] = dc_field(repr=False)
    envelope: float  # asserted C in residual <= C n mu^(-1/2)
    c_fit: float | None  # max residual / (n mu^(-1/2)) over the grid
    fitted_slope: float | None  # trend of max_j residual(j, n)/n against n
    passed: bool

    def to_json_dict(self, include_table: bool = False) -> dict:
        doc = {
            "mu": self.mu,
            "ap3_worst": self.ap3_worst,
            "ap4_worst": self.ap4_worst,
            "conditions_pass": self.conditions_pass,
            "envelope": self.envelope,
            "c_fit": self.c_fit,
            "fitted_slope": self.fitted_slope,
            "passed": self.passed,
        }
        if include_table:
            bound = self.mu ** -0.5
            doc["residuals"] = [
                [j, n, r, n * bound] for (j, n), r in sorted(self.residuals.items())
            ]
        return doc


def ap_report(
    seq: MatrixSequence,
    mu: float,
    n_max: int,
    envelope: float = RESIDUAL_ENVELOPE,
) -> ApReport:
    """Checks the hypotheses and fills the residual grid for n in [3, n_max]."""
    if n_max < 3:
        raise ValueError("avalanche audit needs n_max >= 3")
    lo, hi = seq.window
    ap3, ap4, ok = ap_conditions(seq, mu)

    residuals: dict[tuple[int, int], float] = {}
    per_n_max: dict[int, float] = {}
    for j in range(lo, hi - 2 + 1):
        room = hi - j + 1
        prods = list(forward_scan(seq, j, min(n_max, room)))
        lpairs = [_pair_log_norm(seq, j + k) for k in range(min(n_max, room) - 1)]
        singles = [_log_sigma1(seq[j + k]) for k in range(min(n_max, room))]
        mids = 0.0
        pairs = lpairs[0] if lpairs else 0.0
        for n in range(3, min(n_max, room) + 1):
            mids += singles[n - 2]
            pairs += lpairs[n - 2]
            r = abs(prods[n].log_sigma1 + mids - pairs)
            residuals[(j, n)] = r
            if n not in per_n_max or r > per_n_max[n]:
                per_n_max[n] = r

    scale = mu ** -0.5
    c_fit = None
    if residuals:
        c_fit = max(r / (n * scale) for (_, n), r in residuals.items())
    slope = _drift_rate({n: r / n for n, r in per_n_max.items() if r > 0}) if per_n_max else None
    passed = ok and (c_fit is None or c_fit <= envelope)
    return ApReport(
        mu=mu,
        ap3_worst=ap3,
        ap4_worst=ap4,
        conditions_pass=ok,
        residuals=residuals,
        envelope=envelope,
        c_fit=c_fit,
        fitted_slope=slope,
        passed=passed,
    )
