"""Finite-window estimators for the singular-value gap and fast-invertibility
conditions, and the full dominated-splitting certificate.

All suprema, infima, and ratios are handled in the log domain.  Verdicts are
threshold-based and every threshold is configuration, echoed into reports:
a finite window can only certify behaviour at its own scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

from .cocycle import (
    ConvergenceCert,
    MatrixSequence,
    estimate_splitting,
    forward_scan,
    invariance_residual,
)
from .errors import NoConvergence, NotUnimodular, ProductVanished, WindowExceeded
from .matrix2c import det
from .projective import ProjPoint, dist

INF = float("inf")
NEG_INF = float("-inf")


@dataclass(frozen=True)
class Thresholds:
    """Engineering pass thresholds and scan sizes; all reported in output."""

    n_max: int = 40
    mu_min: float = 1.05  # SVG passes when the fitted decay beats this
    epsilon: float = 0.1  # FI growth allowance relative to the SVG rate
    fi_log_c_max: float = math.log(1e4)  # FI fails when the fitted constant explodes
    sep_min: float = 1e-4  # witnessed separation collapse below this
    n_cap: int = 64  # largest N tried for the domination gap
    gap_lambda: float = 2.0  # required ||B_N u|| / ||B_N s|| factor
    split_tol: float = 1e-9  # stopping tolerance for direction estimates
    ueg_lambda_min: float = 1.10  # uniform growth passes above this rate
    fit_n_lo: int = 2  # transient steps discarded by rate fits

    def to_json_dict(self) -> dict:
        return {
            "n_max": self.n_max,
            "mu_min": self.mu_min,
            "epsilon": self.epsilon,
            "fi_log_c_max": self.fi_log_c_max,
            "sep_min": self.sep_min,
            "n_cap": self.n_cap,
            "gap_lambda": self.gap_lambda,
            "split_tol": self.split_tol,
            "ueg_lambda_min": self.ueg_lambda_min,
            "fit_n_lo": self.fit_n_lo,
        }


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(sup_j ratio_n) against n.

    ``rate`` is the signed per-step exponent (the slope); a decaying profile
    has rate < 0 and fitted mu = exp(-rate).  Entries of ``sup_log`` and
    ``table`` are natural-log ratios; +-inf mark vanished / rank-one products.
    """

    rate: float
    log_c: float
    n_lo: int
    n_hi: int
    residual_max: float
    sup_log: dict[int, float] = dc_field(repr=False)
    table: dict[tuple[int, int], float] = dc_field(repr=False)
    passed: bool = False

    @property
    def mu(self) -> float:
        return math.exp(-self.rate)

    def to_json_dict(self, include_table: bool = False) -> dict:
        doc = {
            "rate": self.rate,
            "log_c": self.log_c,
            "mu": self.mu,
            "n_lo": self.n_lo,
            "n_hi": self.n_hi,
            "residual_max": self.residual_max,
            "passed": self.passed,
            "sup_log": [[n, v] for n, v in sorted(self.sup_log.items())],
        }
        if include_table:
            doc["table"] = [[j, n, v] for (j, n), v in sorted(self.table.items())]
        return doc


def _fit_line(points: list[tuple[int, float]]) -> tuple[float, float, float]:
    """(slope, intercept, max abs residual) over finite points; degenerate
    inputs fall back to a flat line through the data."""
    finite = [(n, y) for n, y in points if math.isfinite(y)]
    if not finite:
        return NEG_INF, NEG_INF, 0.0
    if len(finite) == 1:
        return 0.0, finite[0][1], 0.0
    xbar = sum(n for n, _ in finite) / len(finite)
    ybar = sum(y for _, y in finite) / len(finite)
    sxx = sum((n - xbar) ** 2 for n, _ in finite)
    slope = sum((n - xbar) * (y - ybar) for n, y in finite) / sxx
    intercept = ybar - slope * xbar
    resid = max(abs(y - (intercept + slope * n)) for n, y in finite)
    return slope, intercept, resid


def _scan_logs(seq: MatrixSequence, n_max: int) -> dict[int, tuple[list[float], list[float]]]:
    """Per-site lists of log sigma1(B_n(j)), log sigma2(B_n(j)), n = 0..cap."""
    out: dict[int, tuple[list[float], list[float]]] = {}
    for j in seq.indices():
        cap = min(n_max + 1, seq.hi - j + 1)
        ls1 = [0.0]
        ls2 = [0.0]
        try:
            for n, prod in enumerate(forward_scan(seq, j, cap)):
                if n == 0:
                    continue
                ls1.append(prod.log_sigma1)
                ls2.append(prod.log_sigma2)
        except ProductVanished:
            while len(ls1) < cap + 1:
                ls1.append(NEG_INF)
                ls2.append(NEG_INF)
        out[j] = (ls1, ls2)
    return out


def _svg_fi_fits(
    seq: MatrixSequence,
    n_max: int,
    thresholds: Thresholds,
    scans: dict[int, tuple[list[float], list[float]]],
) -> tuple[RateFit, RateFit]:
    lo, hi = seq.window
    svg_sup: dict[int, float] = {}
    svg_table: dict[tuple[int, int], float] = {}
    fi_sup: dict[int, float] = {}
    fi_table: dict[tuple[int, int], float] = {}

    for n in range(0, n_max + 1):
        best_svg = NEG_INF
        best_fi = NEG_INF
        for j in range(lo, hi - n + 1):
            ls1_j, ls2_j = scans[j]
            denom = ls1_j[n + 1]
            r_svg = max(ls2_j[n] - denom, scans[j + 1][1][n] - denom) if j + 1 <= hi else ls2_j[n] - denom
            if denom == NEG_INF:
                r_svg = INF
            svg_table[(j, n)] = r_svg
            if r_svg > best_svg:
                best_svg = r_svg
            if n >= 1:
                r_fi = max(ls1_j[n] - denom, scans[j + 1][0][n] - denom) if j + 1 <= hi else ls1_j[n] - denom
                if denom == NEG_INF:
                    r_fi = INF
                fi_table[(j, n)] = r_fi
                if r_fi > best_fi:
                    best_fi = r_fi
        svg_sup[n] = best_svg
        if n >= 1:
            fi_sup[n] = best_fi

    n_lo = max(thresholds.fit_n_lo, 0)
    svg_pts = [(n, v) for n, v in svg_sup.items() if n >= n_lo]
    slope, intercept, resid = _fit_line(svg_pts)
    svg_ok = (
        -slope > math.log(thresholds.mu_min)
        and not any(v == INF for v in svg_sup.values())
    )
    svg_fit = RateFit(slope, intercept, n_lo, n_max, resid, svg_sup, svg_table, svg_ok)

    fi_pts = [(n, v) for n, v in fi_sup.items() if n >= max(n_lo, 1)]
    fslope, fintercept, fresid = _fit_line(fi_pts)
    svg_log_mu = -slope
    fi_ok = (
        fslope < (1.0 - thresholds.epsilon) * svg_log_mu
        and fintercept <= thresholds.fi_log_c_max
        and not any(v == INF for v in fi_sup.values())
    )
    fi_fit = RateFit(fslope, fintercept, max(n_lo, 1), n_max, fresid, fi_sup, fi_table, fi_ok)
    return svg_fit, fi_fit


def _require_window(seq: MatrixSequence, n_max: int) -> None:
    if len(seq) < n_max + 2:
        raise WindowExceeded(
            f"window length {len(seq)} too short for n_max={n_max} (needs >= n_max + 2)"
        )


def svg_profile(seq: MatrixSequence, n_max: int, thresholds: Thresholds = Thresholds()) -> RateFit:
    """Worst-case gap ratios sigma2(B_n)/sigma1(B_{n+1}) and their decay fit."""
    _require_window(seq, n_max)
    scans = _scan_logs(seq, n_max)
    svg_fit, _ = _svg_fi_fits(seq, n_max, thresholds, scans)
    return svg_fit


def fi_profile(
    seq: MatrixSequence, n_max: int, epsilon: float | None = None,
    thresholds: Thresholds = Thresholds(),
) -> RateFit:
    """Worst-case norm ratios sigma1(B_n)/sigma1(B_{n+1}) and their growth fit.

    Passes when the fitted growth stays below (1 - epsilon) times the fitted
    SVG rate and the fitted constant stays moderate; on a finite window an
    exploding constant is how an Example-1-style failure shows up, since the
    per-n supremum saturates at the window edge instead of growing with n.
    """
    _require_window(seq, n_max)
    if epsilon is not None:
        thresholds = replace(thresholds, epsilon=epsilon)
    scans = _scan_logs(seq, n_max)
    _, fi_fit = _svg_fi_fits(seq, n_max, thresholds, scans)
    return fi_fit


def norm_floor(seq: MatrixSequence, n_max: int) -> dict[int, float]:
    """{n: inf_j log sigma1(B_n(j))} for n = 1 .. n_max."""
    _require_window(seq, n_max)
    scans = _scan_logs(seq, n_max)
    return _norm_floor_from_scans(seq, n_max, scans)


def _norm_floor_from_scans(seq, n_max, scans) -> dict[int, float]:
    lo, hi = seq.window
    floor: dict[int, float] = {}
    for n in range(1, n_max + 1):
        floor[n] = min(scans[j][0][n] for j in range(lo, hi - n + 2))
    return floor


def ueg_check(seq: MatrixSequence, n_max: int, thresholds: Thresholds = Thresholds()) -> RateFit:
    """Uniform exponential growth of inf_j ||A_n(j)|| for unimodular input."""
    for j in seq.indices():
        if abs(det(seq[j]) - 1.0) > 1e-10:
            raise NotUnimodular(f"det(B({j})) differs from 1 beyond 1e-10")
    _require_window(seq, n_max)
    scans = _scan_logs(seq, n_max)
    floor = _norm_floor_from_scans(seq, n_max, scans)
    pts = [(n, v) for n, v in floor.items() if n >= max(thresholds.fit_n_lo, 1)]
    slope, intercept, resid = _fit_line(pts)
    passed = slope >= math.log(thresholds.ueg_lambda_min) and all(
        math.isfinite(v) for v in floor.values()
    )
    return RateFit(slope, intercept, max(thresholds.fit_n_lo, 1), n_max, resid,
                   floor, {}, passed)


@dataclass(frozen=True)
class DominationReport:
    """Full finite-window dominated-splitting certificate.

    ``verdict`` is one of "dominated", "not_dominated", "inconclusive".
    A negative verdict is only issued on a witnessed violation (separation
    collapse, vanished product); estimator failure alone is inconclusive.
    """

    verdict: str
    svg: RateFit
    fi: RateFit
    es: dict[int, ProjPoint]
    eu: dict[int, ProjPoint]
    certs: dict[int, ConvergenceCert]
    failed_js: list[int]
    min_separation: float | None
    argmin_separation: int | None
    n_dom: int | None
    lambda_dom: float | None
    invariance_max_residual: float | None
    norm_floor_log: dict[int, float]
    witnesses: list[str]
    notes: list[str]
    thresholds: Thresholds
    window: tuple[int, int]
    jrange: tuple[int, int]

    def to_json_dict(self, include_table: bool = False) -> dict:
        def point(p: ProjPoint):
            z = p.affine
            return "inf" if z is None else [z.real, z.imag]

        return {
            "verdict": self.verdict,
            "svg": self.svg.to_json_dict(include_table),
            "fi": self.fi.to_json_dict(include_table),
            "fields": [
                {
                    "j": j,
                    "Es": point(self.es[j]),
                    "Eu": point(self.eu[j]),
                    "n_star_s": self.certs[j].n_star_s,
                    "n_star_u": self.certs[j].n_star_u,
                    "rate_s": self.certs[j].rate_s,
                    "rate_u": self.certs[j].rate_u,
                }
                for j in sorted(self.es)
            ],
            "failed_js": self.failed_js,
            "min_separation": self.min_separation,
            "argmin_separation": self.argmin_separation,
            "n_dom": self.n_dom,
            "lambda_dom": self.lambda_dom,
            "invariance_max_residual": self.invariance_max_residual,
            "norm_floor_log": [[n, v] for n, v in sorted(self.norm_floor_log.items())],
            "witnesses": self.witnesses,
            "notes": self.notes,
            "thresholds": self.thresholds.to_json_dict(),
            "window": list(self.window),
            "jrange": list(self.jrange),
        }


def _gap_search(
    seq: MatrixSequence,
    es: dict[int, ProjPoint],
    eu: dict[int, ProjPoint],
    thresholds: Thresholds,
) -> tuple[int | None, float | None]:
    """Smallest N with log||B_N u|| - log||B_N s|| >= log(gap_lambda) - 1e-12
    at every estimated site still inside the window at that depth; sites whose
    room is exhausted drop out of the minimum (finite-window truncation).
    Returns (N, achieved min gap factor)."""
    js = sorted(es)
    if not js:
        return None, None
    want = math.log(thresholds.gap_lambda) - 1e-12
    state = {}
    for j in js:
        state[j] = {
            "u": eu[j].vector(), "lu": 0.0, "s": es[j].vector(), "ls": 0.0, "alive": True,
        }
    n_limit = min(thresholds.n_cap, max(seq.hi - i + 1 for i in js))
    for n in range(1, n_limit + 1):
        worst = INF
        any_alive = False
        for j in js:
            st = state[j]
            if not st["alive"] or j + n - 1 > seq.hi:
                st["alive"] = False
                continue
            any_alive = True
            m = seq[j + n - 1]
            for key, lkey in (("u", "lu"), ("s", "ls")):
                if st[lkey] == NEG_INF:
                    continue
                w = m.apply(st[key])
                nw = math.hypot(abs(w[0]), abs(w[1]))
                if nw == 0.0:
                    st[lkey] = NEG_INF
                else:
                    st[key] = (w[0] / nw, w[1] / nw)
                    st[lkey] += math.log(nw)
            if st["lu"] == NEG_INF:
                gap = NEG_INF
            elif st["ls"] == NEG_INF:
                gap = INF
            else:
                gap = st["lu"] - st["ls"]
            if gap < worst:
                worst = gap
        if not any_alive:
            break
        if worst >= want:
            return n, math.exp(worst) if worst != INF else INF
    return None, None


def check_domination(
    seq: MatrixSequence,
    thresholds: Thresholds = Thresholds(),
    jrange: tuple[int, int] | None = None,
) -> DominationReport:
    """Runs the whole pipeline: profiles, field estimation, separation,
    domination-gap search, and norm floors, returning a structured verdict."""
    lo, hi = seq.window
    notes: list[str] = []
    witnesses: list[str] = []

    n_max = thresholds.n_max
    if len(seq) < n_max + 2:
        n_max = max(1, len(seq) - 2)
        notes.append(f"n_max capped to {n_max} by window length {len(seq)}")

    scans = _scan_logs(seq, n_max)
    svg_fit, fi_fit = _svg_fi_fits(seq, n_max, thresholds, scans)
    floor = _norm_floor_from_scans(seq, n_max, scans)

    if jrange is None:
        jrange = (lo + 4, hi - 3)
    j_lo, j_hi = jrange
    if j_lo < lo or j_hi > hi:
        raise WindowExceeded(f"jrange [{j_lo}, {j_hi}] outside window [{lo}, {hi}]")

    es: dict[int, ProjPoint] = {}
    eu: dict[int, ProjPoint] = {}
    certs: dict[int, ConvergenceCert] = {}
    failed: list[int] = []
    for j in range(j_lo, j_hi + 1):
        try:
            s_pt, u_pt, cert = estimate_splitting(seq, j, n_max, thresholds.split_tol)
        except (NoConvergence, ProductVanished):
            failed.append(j)
            continue
        es[j], eu[j], certs[j] = s_pt, u_pt, cert

    edge_failures = [j for j in failed if min(j - lo, hi - j + 1) < 12]
    if edge_failures:
        notes.append(
            "one-sided window: estimation ran out of room near the edge "
            f"(truncated products) at js {edge_failures[:8]}"
        )
    if len(edge_failures) < len(failed):
        notes.append(
            "directions did not converge at some interior sites "
            "(degenerate or slowly contracting products)"
        )

    min_sep: float | None = None
    argmin: int | None = None
    for j in es:
        d = dist(es[j], eu[j])
        if min_sep is None or d < min_sep:
            min_sep, argmin = d, j

    inv_max: float | None = None
    for j in es:
        if j + 1 in es:
            rs, ru = invariance_residual(seq, j, es, eu)
            worst = max(rs, ru)
            if inv_max is None or worst > inv_max:
                inv_max = worst

    n_dom, lambda_dom = _gap_search(seq, es, eu, thresholds)

    vanished = any(v == NEG_INF for v in floor.values())
    if vanished:
        witnesses.append("condition (d)': some inf_j ||B_n(j)|| vanished on the window")
    if min_sep is not None and min_sep <= thresholds.sep_min:
        witnesses.append(
            f"condition (c): separation collapse, d(Eu, Es) = {min_sep:.3e} "
            f"<= sep_min at j = {argmin}"
        )

    if witnesses:
        verdict = "not_dominated"
    elif (
        not failed
        and es
        and min_sep is not None
        and min_sep > thresholds.sep_min
        and n_dom is not None
        and not vanished
    ):
        verdict = "dominated"
    else:
        verdict = "inconclusive"

    return DominationReport(
        verdict=verdict,
        svg=svg_fit,
        fi=fi_fit,
        es=es,
        eu=eu,
        certs=certs,
        failed_js=failed,
        min_separation=min_sep,
        argmin_separation=argmin,
        n_dom=n_dom,
        lambda_dom=lambda_dom,
        invariance_max_residual=inv_max,
        norm_floor_log=floor,
        witnesses=witnesses,
        notes=notes,
        thresholds=thresholds,
        window=(lo, hi),
        jrange=(j_lo, j_hi),
    )
