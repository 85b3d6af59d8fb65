"""Windowed products over a matrix sequence and the invariant directions.

Products B_n(j) = B(j+n-1) ... B(j) are renormalized after every factor:
the stored core has operator norm 1 and the accumulated log scale carries
sigma1, so products that decay or grow geometrically never leave the
representable range.  log|det| is accumulated factor by factor, which keeps
sigma2 of a product exact in the log domain far below the entrywise noise
floor of the core determinant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import (
    Degenerate,
    InvalidSpec,
    NoConvergence,
    ProductVanished,
    WindowExceeded,
)
from .matrix2c import IDENTITY, Mat2C, Svd2, det, mul, singular_values, svd2
from .projective import (
    ProjPoint,
    act,
    dist,
    expanding_image,
    image_line,
    kernel_line,
    most_contracted,
)
from .errors import KernelHit

NEG_INF = float("-inf")


class MatrixSequence:
    """A finite window j -> B(j) of nonzero matrices with a uniform norm bound.

    Entries are validated once at construction: every matrix nonzero and
    sigma1(B(j)) < bound_M.  Instances are immutable and safe to share.
    """

    __slots__ = ("_entries", "_lo", "_hi", "bound_M", "source")

    def __init__(
        self,
        entries: Mapping[int, Mat2C],
        bound_M: float,
        source: dict | None = None,
    ):
        if not entries:
            raise InvalidSpec("sequence window is empty")
        js = sorted(entries)
        lo, hi = js[0], js[-1]
        if js != list(range(lo, hi + 1)):
            raise InvalidSpec("sequence window has gaps")
        for j, m in entries.items():
            if m.is_zero():
                raise InvalidSpec(f"entry at j={j} is the zero matrix")
            s1, _ = singular_values(m)
            if not s1 < bound_M:
                raise InvalidSpec(f"entry at j={j} violates sigma1 < bound_M ({s1} >= {bound_M})")
        self._entries = dict(entries)
        self._lo, self._hi = lo, hi
        self.bound_M = float(bound_M)
        self.source = source

    @property
    def window(self) -> tuple[int, int]:
        return (self._lo, self._hi)

    @property
    def lo(self) -> int:
        return self._lo

    @property
    def hi(self) -> int:
        return self._hi

    def __len__(self) -> int:
        return self._hi - self._lo + 1

    def __getitem__(self, j: int) -> Mat2C:
        try:
            return self._entries[j]
        except KeyError:
            raise WindowExceeded(f"j={j} outside window [{self._lo}, {self._hi}]") from None

    def indices(self) -> range:
        return range(self._lo, self._hi + 1)

    def restrict(self, lo: int, hi: int) -> "MatrixSequence":
        if lo < self._lo or hi > self._hi or lo > hi:
            raise WindowExceeded(f"[{lo}, {hi}] not inside [{self._lo}, {self._hi}]")
        sub = {j: self._entries[j] for j in range(lo, hi + 1)}
        return MatrixSequence(sub, self.bound_M, source=self.source)

    def to_json_dict(self) -> dict:
        entries = []
        for j in self.indices():
            m = self._entries[j]
            entries.append(
                {
                    "j": j,
                    "m": [[z.real, z.imag] for z in (m.a, m.b, m.c, m.d)],
                }
            )
        return {"window": [self._lo, self._hi], "bound_M": self.bound_M, "entries": entries}

    @staticmethod
    def from_json_dict(doc: dict) -> "MatrixSequence":
        try:
            lo, hi = doc["window"]
            bound = float(doc["bound_M"])
            entries = {}
            for rec in doc["entries"]:
                re_a, im_a = rec["m"][0]
                re_b, im_b = rec["m"][1]
                re_c, im_c = rec["m"][2]
                re_d, im_d = rec["m"][3]
                entries[int(rec["j"])] = Mat2C(
                    complex(re_a, im_a),
                    complex(re_b, im_b),
                    complex(re_c, im_c),
                    complex(re_d, im_d),
                )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InvalidSpec(f"malformed sequence document: {exc}") from exc
        seq = MatrixSequence(entries, bound, source=doc.get("source"))
        if seq.window != (int(lo), int(hi)):
            raise InvalidSpec("declared window does not match entries")
        return seq


def load_sequence(path: str) -> MatrixSequence:
    with open(path, "r", encoding="utf-8") as fh:
        return MatrixSequence.from_json_dict(json.load(fh))


def dump_sequence(seq: MatrixSequence, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(seq.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


@dataclass(frozen=True, slots=True)
class ScaledProduct:
    """B_n(start) stored as exp(log_scale) * core with sigma1(core) = 1.

    log_abs_det accumulates log|det| of the factors, so sigma2 of the
    product is available exactly in the log domain even when the core's
    entrywise determinant has been swallowed by rounding.
    """

    log_scale: float
    core: Mat2C
    length: int
    start: int
    log_abs_det: float

    @staticmethod
    def identity(start: int) -> "ScaledProduct":
        return ScaledProduct(0.0, IDENTITY, 0, start, 0.0)

    def left_multiply(self, factor: Mat2C) -> "ScaledProduct":
        """The product factor . B_n(start), i.e. B_{n+1}(start)."""
        raw = mul(factor, self.core)
        if raw.is_zero():
            raise ProductVanished(
                f"product of length {self.length + 1} starting at j={self.start} vanished"
            )
        s1, _ = singular_values(raw)
        fdet = abs(det(factor))
        return ScaledProduct(
            self.log_scale + math.log(s1),
            raw.scale(1.0 / s1),
            self.length + 1,
            self.start,
            self.log_abs_det + (math.log(fdet) if fdet > 0.0 else NEG_INF),
        )

    @property
    def log_sigma1(self) -> float:
        s1, _ = singular_values(self.core)
        return self.log_scale + math.log(s1)

    @property
    def log_sigma2(self) -> float:
        return self.log_abs_det - self.log_sigma1

    def svd(self) -> Svd2:
        """SVD of the core; directions of the product itself."""
        return svd2(self.core)

    def matrix(self) -> Mat2C:
        """exp(log_scale) * core; may over/underflow for long products."""
        return self.core.scale(math.exp(self.log_scale))

    def apply_log(self, v: tuple[complex, complex]) -> float:
        """log ||B_n(start) v|| for a unit vector v."""
        w = self.core.apply(v)
        return self.log_scale + math.log(math.hypot(abs(w[0]), abs(w[1])))


def window_product(seq: MatrixSequence, j: int, n: int) -> ScaledProduct:
    """B_n(j) = B(j+n-1) ... B(j) with per-factor renormalization."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 0 and (j < seq.lo or j + n - 1 > seq.hi):
        raise WindowExceeded(f"[{j}, {j + n - 1}] not inside [{seq.lo}, {seq.hi}]")
    prod = ScaledProduct.identity(j)
    for k in range(n):
        prod = prod.left_multiply(seq[j + k])
    return prod


def forward_scan(seq: MatrixSequence, j: int, n_max: int) -> Iterator[ScaledProduct]:
    """Yields B_n(j) for n = 0 .. n_max (requires j + n_max - 1 <= hi)."""
    if n_max > 0 and (j < seq.lo or j + n_max - 1 > seq.hi):
        raise WindowExceeded(f"[{j}, {j + n_max - 1}] not inside [{seq.lo}, {seq.hi}]")
    prod = ScaledProduct.identity(j)
    yield prod
    for k in range(n_max):
        prod = prod.left_multiply(seq[j + k])
        yield prod


def backward_scan(seq: MatrixSequence, j: int, n_max: int) -> Iterator[ScaledProduct]:
    """Yields B_n(j - n) for n = 0 .. n_max: products ending just before j."""
    if n_max > 0 and (j - n_max < seq.lo or j - 1 > seq.hi):
        raise WindowExceeded(f"[{j - n_max}, {j - 1}] not inside [{seq.lo}, {seq.hi}]")
    prod = ScaledProduct.identity(j)
    yield prod
    for k in range(1, n_max + 1):
        # B_{k}(j-k) = B_{k-1}(j-k+1) . B(j-k)
        factor = seq[j - k]
        raw = mul(prod.core, factor)
        if raw.is_zero():
            raise ProductVanished(f"product of length {k} ending at j={j - 1} vanished")
        s1, _ = singular_values(raw)
        fdet = abs(det(factor))
        prod = ScaledProduct(
            prod.log_scale + math.log(s1),
            raw.scale(1.0 / s1),
            k,
            j - k,
            prod.log_abs_det + (math.log(fdet) if fdet > 0.0 else NEG_INF),
        )
        yield prod


def sn(seq: MatrixSequence, j: int, n: int) -> ProjPoint:
    """Most contracted direction of B_n(j)."""
    prod = window_product(seq, j, n)
    sv = prod.svd()
    if sv.degenerate:
        raise Degenerate(f"B_{n}({j}) has sigma1 ~ sigma2")
    return most_contracted(sv)


def un(seq: MatrixSequence, j: int, n: int) -> ProjPoint:
    """Expanding image direction of B_n(j-n): the n-step past of site j."""
    prod = window_product(seq, j - n, n)
    sv = prod.svd()
    if sv.degenerate:
        raise Degenerate(f"B_{n}({j - n}) has sigma1 ~ sigma2")
    return expanding_image(sv)


@dataclass(frozen=True, slots=True)
class ConvergenceCert:
    """Per-n consecutive distances and the fitted geometric decay rates."""

    n_star_s: int
    n_star_u: int
    s_steps: dict[int, float] = field(repr=False)
    u_steps: dict[int, float] = field(repr=False)
    rate_s: float | None
    rate_u: float | None
    tol: float

    def to_json_dict(self) -> dict:
        return {
            "n_star_s": self.n_star_s,
            "n_star_u": self.n_star_u,
            "s_steps": [[n, d] for n, d in sorted(self.s_steps.items())],
            "u_steps": [[n, d] for n, d in sorted(self.u_steps.items())],
            "rate_s": self.rate_s,
            "rate_u": self.rate_u,
            "tol": self.tol,
        }


def _fit_rate(steps: dict[int, float]) -> float | None:
    # steps at the rounding floor of the chordal metric carry no rate signal
    pts = [(n, math.log(d)) for n, d in steps.items() if 1e-13 < d and math.isfinite(d)]
    if len(pts) < 2:
        return None
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xbar = sum(xs) / len(xs)
    ybar = sum(ys) / len(ys)
    sxx = sum((x - xbar) ** 2 for x in xs)
    if sxx == 0.0:
        return None
    return sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys)) / sxx


def _direction_run(
    points: Iterator[ProjPoint | None], tol: float
) -> tuple[int | None, dict[int, ProjPoint], dict[int, float]]:
    """Consumes (n=1, 2, ...) direction estimates until three successive
    consecutive distances fall below tol; returns the run's opening index."""
    steps: dict[int, float] = {}
    pts: dict[int, ProjPoint] = {}
    run = 0
    prev: ProjPoint | None = None
    for n, pt in enumerate(points, start=1):
        if pt is None:
            prev = None
            run = 0
            continue
        pts[n] = pt
        if prev is not None:
            d = dist(prev, pt)
            steps[n - 1] = d
            run = run + 1 if d < tol else 0
            if run >= 3:
                return n - 3, pts, steps
        prev = pt
    return None, pts, steps


def _points(scan: Iterator[ScaledProduct], column: str) -> Iterator[ProjPoint | None]:
    for n, prod in enumerate(scan):
        if n == 0:
            continue
        sv = prod.svd()
        if sv.degenerate:
            yield None
        elif column == "s":
            yield most_contracted(sv)
        else:
            yield expanding_image(sv)


def estimate_splitting(
    seq: MatrixSequence, j: int, n_max: int, tol: float
) -> tuple[ProjPoint, ProjPoint, ConvergenceCert]:
    """Estimates E^s(j), E^u(j) with a Cauchy-style stopping certificate.

    s_n(j) and u_n(j) are scanned until three successive consecutive
    distances fall below ``tol``; the first index n* opening such a run is
    returned (s_{n*}, u_{n*}).  Degenerate products interrupt the run.
    Raises NoConvergence when either side exhausts its room in the window
    without meeting the rule.
    """
    n_s = min(n_max, seq.hi - j + 1)
    n_u = min(n_max, j - seq.lo)

    n_star_s, s_pts, s_steps = _direction_run(_points(forward_scan(seq, j, n_s), "s"), tol)
    n_star_u, u_pts, u_steps = _direction_run(_points(backward_scan(seq, j, n_u), "u"), tol)

    if n_star_s is None or n_star_u is None:
        side = "s" if n_star_s is None else "u"
        raise NoConvergence(
            f"direction {side}_n at j={j} did not meet tol={tol} within n_max={n_max}"
        )
    cert = ConvergenceCert(
        n_star_s=n_star_s,
        n_star_u=n_star_u,
        s_steps=s_steps,
        u_steps=u_steps,
        rate_s=_fit_rate(s_steps),
        rate_u=_fit_rate(u_steps),
        tol=tol,
    )
    return s_pts[n_star_s], u_pts[n_star_u], cert


def invariance_residual(
    seq: MatrixSequence,
    j: int,
    es_field: Mapping[int, ProjPoint],
    eu_field: Mapping[int, ProjPoint],
) -> tuple[float, float]:
    """Distance from B(j)-pushforward of the fields at j to the fields at j+1.

    When E^s(j) lies on the kernel of B(j) the stable residual becomes the
    distance to the kernel line itself (the line is absorbed); when B(j) is
    singular the unstable residual compares E^u(j+1) against the image line.
    """
    m = seq[j]
    sv = svd2(m)
    try:
        res_s = dist(act(m, es_field[j]), es_field[j + 1])
    except KernelHit:
        res_s = dist(es_field[j], kernel_line(sv))
    if sv.sigma2 == 0.0:
        res_u = dist(image_line(sv), eu_field[j + 1])
    else:
        res_u = dist(act(m, eu_field[j]), eu_field[j + 1])
    return res_s, res_u
