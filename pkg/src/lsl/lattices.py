"""Exact algebra for scaled cubic and Construction-A nested lattice pairs.

Lattice points carry integer coordinate vectors plus a shared scalar
scale, so point arithmetic (sums, negation, coset reduction) is exact
integer work.  Floating point enters only when a point is embedded into
R^N or when real-valued vectors (noise, dither) are quantized.

Quantizer convention: the nearest point wins and ties go to the
lexicographically smallest coordinate vector.  Per coordinate this is
round-half-down, which makes the fundamental cell of a cubic lattice the
half-open box (-s/2, s/2]^N and the modulo reduction a true function.

The pair constructors scale the coarse lattice so the per-dimension
second moment of its fundamental cell is exactly 1.  For a coarse cell
of side ``s = scale_fine * q`` that forces ``scale_fine = sqrt(12)/q``;
the squared scale is kept as the authoritative (rational) quantity so
the normalization survives round-tripping through floats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InvalidCodeError, InvariantViolationError

CUBIC = "cubic"
CONSTRUCTION_A = "construction-a"

#: Absolute tolerance (in cell-side units) used when deciding half-open
#: boundary membership for embedded points.  Exact-coordinate points land
#: within a few ulp of the boundary after float embedding; anything a
#: caller feeds deliberately should clear the boundary by more than this.
BOUNDARY_TOL = 1e-9

DEFAULT_ENUMERATION_CAP = 1 << 16


def _round_half_down(t):
    """Nearest integer per entry, halves rounded toward -inf."""
    return np.ceil(np.asarray(t, dtype=float) - 0.5).astype(np.int64)


def _centered_mod(v, q):
    """Residues of ``v`` mod q in the centered range (-q/2, q/2]."""
    r = np.mod(np.asarray(v, dtype=np.int64), q)
    return np.where(2 * r > q, r - q, r)


def _check_vector(lat, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (lat.dimension,):
        raise ValueError(
            f"expected a length-{lat.dimension} vector, got shape {x.shape}")
    # Non-finite entries always poison the sum; the elementwise re-check
    # only runs to acquit huge-but-finite vectors whose sum overflowed.
    if not np.isfinite(np.sum(x)) and not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


@dataclass(frozen=True)
class Lattice:
    """A scaled integer lattice or Construction-A lattice in R^N.

    ``scale_sq`` is the squared coordinate scale; the real embedding of a
    point with integer coordinates ``v`` is ``sqrt(scale_sq) * v``.  For
    Construction-A, valid coordinate vectors are ``c + q*z`` with ``c`` a
    codeword of the stored linear code and ``z`` integer.
    """

    dimension: int
    family: str
    scale_sq: float
    modulus: int | None = None
    generator: tuple[tuple[int, ...], ...] | None = None
    codewords: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not self.scale_sq > 0:
            raise ValueError("scale_sq must be positive")
        if self.family == CUBIC:
            if self.generator is not None or self.codewords is not None:
                raise ValueError("cubic lattices carry no code")
        elif self.family == CONSTRUCTION_A:
            if self.modulus is None or self.modulus < 2:
                raise ValueError("construction-A requires a modulus q >= 2")
            if not self.generator or not self.codewords:
                raise ValueError("construction-A requires a code")
        else:
            raise ValueError(f"unknown lattice family {self.family!r}")

    @property
    def scale(self) -> float:
        return math.sqrt(self.scale_sq)

    def point(self, coords) -> "LatticePoint":
        """Wrap integer coordinates as a point of this lattice."""
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.dimension:
            raise ValueError("coordinate count does not match dimension")
        if self.family == CONSTRUCTION_A:
            residue = tuple(int(c) % self.modulus for c in coords)
            if residue not in set(self.codewords):
                raise ValueError("coordinates are not on the coded lattice")
        return LatticePoint(coords, self)


@dataclass(frozen=True)
class LatticePoint:
    """Integer coordinates plus the owning lattice (supplies the scale)."""

    coords: tuple[int, ...]
    lattice: Lattice

    def embed(self) -> np.ndarray:
        """Real embedding ``scale * coords``."""
        return self.lattice.scale * np.asarray(self.coords, dtype=float)

    def _require_same_lattice(self, other):
        if self.lattice is not other.lattice and self.lattice != other.lattice:
            raise ValueError("points belong to different lattices")

    def __add__(self, other: "LatticePoint") -> "LatticePoint":
        self._require_same_lattice(other)
        return LatticePoint(
            tuple(a + b for a, b in zip(self.coords, other.coords)),
            self.lattice)

    def __sub__(self, other: "LatticePoint") -> "LatticePoint":
        self._require_same_lattice(other)
        return LatticePoint(
            tuple(a - b for a, b in zip(self.coords, other.coords)),
            self.lattice)

    def __neg__(self) -> "LatticePoint":
        return LatticePoint(tuple(-a for a in self.coords), self.lattice)


@dataclass(frozen=True)
class NestedPair:
    """Fine/coarse lattice pair with coarse = q * fine (as point sets).

    The codebook is the quotient fine/coarse, of size ``nesting_ratio``,
    represented by coset leaders inside the half-open coarse cell.
    ``rate_per_dim`` is log2(nesting_ratio)/dimension.
    """

    fine: Lattice
    coarse: Lattice
    q: int
    nesting_ratio: int
    rate_per_dim: float

    def __post_init__(self):
        if self.fine.dimension != self.coarse.dimension:
            raise ValueError("fine and coarse dimensions differ")
        if self.coarse.family != CUBIC:
            raise ValueError("coarse lattice must be cubic")
        if self.q < 2:
            raise ValueError("nesting modulus must be >= 2")
        expect = self.fine.scale_sq * self.q * self.q
        if abs(expect - self.coarse.scale_sq) > 1e-9 * self.coarse.scale_sq:
            raise ValueError("coarse scale is not q times the fine scale")

    @property
    def dimension(self) -> int:
        return self.fine.dimension

    def reduce(self, point: LatticePoint) -> LatticePoint:
        """Coset leader of ``point`` modulo the coarse lattice.

        Exact integer operation: coordinates are reduced to the centered
        residue range (-q/2, q/2], which embeds inside the half-open
        coarse cell.
        """
        coords = _centered_mod(point.coords, self.q)
        return LatticePoint(tuple(int(c) for c in coords), self.fine)


def make_cubic_pair(q: int, dimension: int) -> NestedPair:
    """Nested pair fine = s*Z^N, coarse = s*q*Z^N with unit coarse moment.

    The coarse cell has per-dimension second moment (s*q)^2/12 = 1, so
    s = sqrt(12)/q.  Rate is log2(q) bits per dimension.
    """
    if q < 2:
        raise ValueError("q must be an integer >= 2")
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    fine = Lattice(dimension=dimension, family=CUBIC, scale_sq=12.0 / (q * q))
    coarse = Lattice(dimension=dimension, family=CUBIC, scale_sq=12.0)
    return NestedPair(fine=fine, coarse=coarse, q=q,
                      nesting_ratio=q ** dimension,
                      rate_per_dim=math.log2(q))


def _mod_q_rank(rows, q):
    """Row rank over the integers mod q via unit-pivot elimination.

    For composite q only entries coprime to q can serve as pivots; a
    leftover nonzero row without a unit entry cannot contribute, which is
    exactly the case where the message-to-codeword map fails injectivity.
    """
    a = [[int(x) % q for x in row] for row in rows]
    k, n = len(a), len(a[0])
    used_cols: set[int] = set()
    rank = 0
    while rank < k:
        pivot = None
        for i in range(rank, k):
            for j in range(n):
                if j not in used_cols and math.gcd(a[i][j], q) == 1:
                    pivot = (i, j)
                    break
            if pivot:
                break
        if pivot is None:
            break
        i, j = pivot
        a[rank], a[i] = a[i], a[rank]
        inv = pow(a[rank][j], -1, q)
        a[rank] = [(inv * x) % q for x in a[rank]]
        for r in range(k):
            if r != rank and a[r][j]:
                f = a[r][j]
                a[r] = [(x - f * y) % q for x, y in zip(a[r], a[rank])]
        used_cols.add(j)
        rank += 1
    return rank


def make_construction_a_pair(q: int, dimension: int, generator,
                             enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
                             ) -> NestedPair:
    """Nested pair with fine = s*(C + q*Z^N) for a linear code C mod q.

    ``generator`` is a k x N integer matrix whose rows span C; it must
    have rank k mod q (checked by row reduction, and independently by
    enumerating all q^k codewords).  Rate is (k/N)*log2(q) bits per
    dimension.
    """
    if q < 2:
        raise ValueError("q must be an integer >= 2")
    rows = [tuple(int(x) for x in row) for row in generator]
    if not rows or any(len(r) != dimension for r in rows):
        raise ValueError("generator must be a k x N matrix")
    k = len(rows)
    if k > dimension:
        raise InvalidCodeError("more generator rows than dimensions")
    if _mod_q_rank(rows, q) != k:
        raise InvalidCodeError("generator is rank deficient mod q")
    if q ** k > enumeration_cap:
        raise CapacityError(
            f"codeword enumeration would exceed cap ({q ** k} > {enumeration_cap})")
    cols = list(zip(*rows))
    words = set()
    for msg in itertools.product(range(q), repeat=k):
        words.add(tuple(sum(m * g for m, g in zip(msg, col)) % q
                        for col in cols))
    if len(words) != q ** k:
        raise InvalidCodeError("generator rows are dependent mod q")
    fine = Lattice(dimension=dimension, family=CONSTRUCTION_A,
                   scale_sq=12.0 / (q * q), modulus=q,
                   generator=tuple(rows), codewords=tuple(sorted(words)))
    coarse = Lattice(dimension=dimension, family=CUBIC, scale_sq=12.0)
    return NestedPair(fine=fine, coarse=coarse, q=q,
                      nesting_ratio=q ** k,
                      rate_per_dim=k * math.log2(q) / dimension)


def quantize(lat: Lattice, x) -> LatticePoint:
    """Nearest lattice point to ``x``; ties go to the lexicographically
    smallest coordinate vector.

    Cubic lattices quantize per coordinate.  Construction-A searches all
    q^k cosets exhaustively, taking the best coset representative from
    each, so the result is globally nearest.
    """
    x = _check_vector(lat, x)
    u = x / lat.scale
    if lat.family == CUBIC:
        n = _round_half_down(u)
        return LatticePoint(tuple(int(c) for c in n), lat)
    q = lat.modulus
    best = None
    for c in lat.codewords:
        carr = np.asarray(c, dtype=np.int64)
        z = _round_half_down((u - carr) / q)
        v = carr + q * z
        d2 = float(np.sum((u - v) ** 2))
        key = (d2, tuple(int(i) for i in v))
        if best is None or key < best:
            best = key
    return LatticePoint(best[1], lat)


def mod_lattice(lat: Lattice, x) -> np.ndarray:
    """``x`` minus its nearest lattice point; lands in the half-open cell."""
    x = _check_vector(lat, x)
    if lat.family == CUBIC:
        # Same arithmetic as quantize, without materializing the point.
        s = lat.scale
        return x - s * np.ceil(x / s - 0.5)
    pt = quantize(lat, x)
    return x - lat.scale * np.asarray(pt.coords, dtype=float)


def in_voronoi(lat: Lattice, x, tol: float = BOUNDARY_TOL) -> bool:
    """Membership in the half-open fundamental cell.

    For cubic lattices the closed upper boundary is accepted with ``tol``
    slack so that exact-coordinate points survive float embedding; the
    open lower boundary stays strict.
    """
    x = _check_vector(lat, x)
    if lat.family == CUBIC:
        u = x / lat.scale
        return bool(np.all(u <= 0.5 + tol) and np.all(u > -0.5))
    return all(c == 0 for c in quantize(lat, x).coords)


def sample_dither(lat: Lattice, rng: np.random.Generator) -> np.ndarray:
    """Draw exactly uniform over the half-open fundamental cell.

    Samples uniformly in the fundamental box [0, s)^N of the generator
    and folds with ``mod_lattice``; the fold is a measure-preserving
    bijection onto the cell.
    """
    if lat.family != CUBIC:
        raise NotImplementedError("dither sampling implemented for cubic lattices")
    box = lat.scale * rng.random(lat.dimension)
    return mod_lattice(lat, box)


def second_moment(lat: Lattice) -> float:
    """Per-dimension second moment of the fundamental cell, closed form.

    A cubic cell of side s has per-dimension moment s^2/12, which is
    exactly 1.0 for normalized coarse lattices.
    """
    if lat.family != CUBIC:
        raise NotImplementedError("closed form available for cubic lattices only")
    return lat.scale_sq / 12.0


def second_moment_mc(lat: Lattice, samples: int,
                     rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of the per-dimension second moment.

    Returns ``(estimate, standard_error)`` from ``samples`` dither draws.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    per_draw = np.empty(samples)
    for i in range(samples):
        d = sample_dither(lat, rng)
        per_draw[i] = np.sum(d * d) / lat.dimension
    est = float(np.mean(per_draw))
    se = float(np.std(per_draw, ddof=1) / math.sqrt(samples))
    return est, se


def codebook(pair: NestedPair,
             cap: int = DEFAULT_ENUMERATION_CAP) -> list[LatticePoint]:
    """All coset leaders of fine/coarse, lexicographically ordered.

    Every leader has coordinates in the centered residue range
    (-q/2, q/2] and therefore embeds inside the half-open coarse cell.
    The list is a group under coordinate addition followed by
    ``pair.reduce``.
    """
    if pair.nesting_ratio > cap:
        raise CapacityError(
            f"codebook size {pair.nesting_ratio} exceeds cap {cap}")
    q = pair.q
    residues = sorted(int(_centered_mod(r, q)) for r in range(q))
    if pair.fine.family == CUBIC:
        coords_iter = itertools.product(residues, repeat=pair.dimension)
        return [LatticePoint(c, pair.fine) for c in coords_iter]
    leaders = sorted(
        tuple(int(x) for x in _centered_mod(np.asarray(c), q))
        for c in pair.fine.codewords)
    return [LatticePoint(c, pair.fine) for c in leaders]


def _log_ball_volume(dimension: int) -> float:
    """log of the volume of the unit N-ball."""
    return 0.5 * dimension * math.log(math.pi) - math.lgamma(0.5 * dimension + 1)


def covering_radius(lat: Lattice) -> float:
    """Radius of the smallest origin ball covering the fundamental cell.

    For a cubic cell of side s this is the half-diagonal s*sqrt(N)/2.
    """
    if lat.family != CUBIC:
        raise NotImplementedError("covering radius known for cubic lattices only")
    return lat.scale * math.sqrt(lat.dimension) / 2.0


def effective_radius(lat: Lattice) -> float:
    """Radius of the ball whose volume equals the cell volume s^N."""
    if lat.family != CUBIC:
        raise NotImplementedError("effective radius known for cubic lattices only")
    n = lat.dimension
    return lat.scale * math.exp(-_log_ball_volume(n) / n)


def ball_normalized_second_moment(dimension: int) -> float:
    """Normalized per-dimension second moment of the unit N-ball.

    Equals 1/((N+2) * V_N^(2/N)) and decreases toward 1/(2*pi*e).
    """
    if dimension < 1:
        raise ValueError("dimension must be a positive integer")
    return 1.0 / ((dimension + 2)
                  * math.exp(2.0 * _log_ball_volume(dimension) / dimension))


@dataclass(frozen=True)
class EpsilonDiagnostic:
    """Gaussian-approximation gap of a lattice cell.

    ``epsilon`` uses natural logarithms; ``amplification`` is
    exp(N * epsilon), the factor by which a dithered cell density may
    exceed the matched Gaussian density.
    """

    epsilon: float
    amplification: float


def gaussian_approx_epsilon(lat: Lattice) -> EpsilonDiagnostic:
    """Goodness-for-covering diagnostic (natural-log convention).

    epsilon = ln(R_cover/R_eff) + 0.5*ln(2*pi*e*G_N) + 1/N, where G_N is
    the normalized N-ball second moment.  Smaller is better; the value is
    reported, never assumed small, because the concrete cell shapes here
    are far from covering-optimal.
    """
    n = lat.dimension
    ratio = covering_radius(lat) / effective_radius(lat)
    g = ball_normalized_second_moment(n)
    eps = math.log(ratio) + 0.5 * math.log(2.0 * math.pi * math.e * g) + 1.0 / n
    return EpsilonDiagnostic(epsilon=eps, amplification=math.exp(n * eps))


def covering_ball_second_moment(lat: Lattice) -> float:
    """Per-dimension second moment of the smallest cell-covering ball.

    Uniform on a ball of radius R has per-dimension moment R^2/(N+2).
    The value is checked against the sandwich
    N/(N+2) <= sigma^2 <= (R_cover/R_eff)^2 rather than assumed.
    """
    n = lat.dimension
    r_u = covering_radius(lat)
    sigma_sq = r_u * r_u / (n + 2)
    lower = n / (n + 2)
    upper = (r_u / effective_radius(lat)) ** 2
    if not (lower - 1e-12 <= sigma_sq <= upper + 1e-12):
        raise InvariantViolationError(
            f"covering-ball moment {sigma_sq} escapes [{lower}, {upper}]")
    return sigma_sq
