"""Low-PAPR sequences and binary linear codes used as sign-balancing sets.

Codes are immutable; the bit <-> sign convention is ``sign = (-1) ** bit``, so
the all-zero codeword leaves a frame unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

# Rudin-Shapiro recursion depth beyond which the pair would not fit in memory
MAX_RUDIN_SHAPIRO_DEPTH = 26
STRENGTH_BRUTE_FORCE_MAX_N = 20
ENUMERATION_MAX_DIM = 22


# --------------------------------------------------------------------------
# sequences

@dataclass(frozen=True)
class SequencePair:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        if len(self.p) != len(self.q):
            raise ValueError("sequences of a pair must have equal length")
        if len(self.p) == 0:
            raise ValueError("sequences must be nonempty")


def rudin_shapiro(m: int) -> SequencePair:
    """Rudin-Shapiro pair of length ``2**m`` from ``P0 = Q0 = (1,)``."""
    if m < 0:
        raise ValueError("recursion depth must be non-negative")
    if m > MAX_RUDIN_SHAPIRO_DEPTH:
        raise ValueError(f"depth {m} exceeds the cap of {MAX_RUDIN_SHAPIRO_DEPTH}")
    p = np.ones(1, dtype=np.int64)
    q = np.ones(1, dtype=np.int64)
    for _ in range(m):
        p, q = np.concatenate((p, q)), np.concatenate((p, -q))
    return SequencePair(p, q)


def aperiodic_autocorrelation(seq, lag: int) -> int:
    seq = np.asarray(seq)
    lag = abs(int(lag))
    if lag >= len(seq):
        return 0
    return int(np.dot(seq[: len(seq) - lag], seq[lag:]))


def autocorrelations(seq) -> np.ndarray:
    """All aperiodic autocorrelations for lags 0..len-1."""
    seq = np.asarray(seq, dtype=np.int64)
    full = np.correlate(seq, seq, mode="full")
    return full[len(seq) - 1:]


def is_complementary_pair(pair: SequencePair) -> bool:
    """True iff the autocorrelations of P and Q cancel at every nonzero lag."""
    total = autocorrelations(pair.p) + autocorrelations(pair.q)
    return bool(np.all(total[1:] == 0))


def write_sequence_csv(path, seq) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("index,value\n")
        for i, v in enumerate(np.asarray(seq).ravel()):
            fh.write(f"{i},{int(v)}\n")


# --------------------------------------------------------------------------
# GF(2) linear algebra

def gf2_rref(matrix) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot columns."""
    a = (np.array(matrix, dtype=np.uint8) & 1).copy()
    if a.ndim != 2:
        raise ValueError("expected a 2-D bit matrix")
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.flatnonzero(a[r:, c])
        if hits.size == 0:
            continue
        h = r + hits[0]
        if h != r:
            a[[r, h]] = a[[h, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def gf2_rank(matrix) -> int:
    return len(gf2_rref(matrix)[1])


def gf2_null_space(matrix, n: int | None = None) -> np.ndarray:
    """Basis (as rows) of ``{x : matrix @ x = 0 over GF(2)}``."""
    a = np.array(matrix, dtype=np.uint8)
    if a.size == 0:
        cols = a.shape[1] if a.ndim == 2 and a.shape[1] else n
        return np.eye(cols, dtype=np.uint8)
    r, pivots = gf2_rref(a)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, p in enumerate(pivots):
            basis[i, p] = r[row, f]
    return basis


@dataclass(frozen=True, eq=False)
class BinaryLinearCode:
    """Binary linear [n, k] code given by k independent generator rows."""

    generator: np.ndarray = field(repr=False)
    n: int

    def __post_init__(self):
        g = np.array(self.generator, dtype=np.uint8).reshape(-1, self.n) & 1
        if g.shape[0] and gf2_rank(g) != g.shape[0]:
            raise ValueError("generator rows must be linearly independent")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @classmethod
    def from_rows(cls, rows, n: int | None = None) -> "BinaryLinearCode":
        """Code spanned by arbitrary rows (dependent rows are reduced away)."""
        rows = np.array(rows, dtype=np.uint8)
        if n is None:
            n = rows.shape[-1]
        if rows.size == 0:
            return cls(np.zeros((0, n), dtype=np.uint8), n)
        basis, _ = gf2_rref(rows.reshape(-1, n))
        return cls(basis, n)

    @classmethod
    def full_space(cls, n: int) -> "BinaryLinearCode":
        return cls(np.eye(n, dtype=np.uint8), n)

    @classmethod
    def zero(cls, n: int) -> "BinaryLinearCode":
        return cls(np.zeros((0, n), dtype=np.uint8), n)

    @classmethod
    def repetition(cls, n: int) -> "BinaryLinearCode":
        return cls(np.ones((1, n), dtype=np.uint8), n)

    @classmethod
    def even_weight(cls, n: int) -> "BinaryLinearCode":
        g = np.zeros((n - 1, n), dtype=np.uint8)
        g[:, 0] = 1
        g[np.arange(n - 1), np.arange(1, n)] = 1
        return cls(g, n)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int, k: int) -> "BinaryLinearCode":
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        while True:
            g = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
            if gf2_rank(g) == k:
                return cls(g, n)

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BinaryLinearCode) or other.n != self.n:
            return NotImplemented
        return self.k == other.k and np.array_equal(
            gf2_rref(self.generator)[0], gf2_rref(other.generator)[0])

    def __hash__(self):
        return hash((self.n, gf2_rref(self.generator)[0].tobytes()))

    def encode(self, messages) -> np.ndarray:
        m = np.asarray(messages, dtype=np.int64)
        return ((m @ self.generator.astype(np.int64)) & 1).astype(np.uint8)

    def codewords(self, cap: int = ENUMERATION_MAX_DIM) -> np.ndarray:
        """All 2**k codewords, row 0 being the zero word."""
        if self.k > cap:
            raise ValueError(f"dimension {self.k} too large to enumerate (cap {cap})")
        idx = np.arange(2 ** self.k, dtype=np.int64)
        msgs = (idx[:, None] >> np.arange(self.k)) & 1
        return self.encode(msgs)

    def random_codewords(self, rng: np.random.Generator, count: int) -> np.ndarray:
        msgs = rng.integers(0, 2, size=(count, self.k))
        return self.encode(msgs)

    def prepend_fixed(self, count: int = 1) -> "BinaryLinearCode":
        """Same code on ``count`` extra leading positions that are always zero."""
        g = np.hstack((np.zeros((self.k, count), dtype=np.uint8), self.generator))
        return BinaryLinearCode(g, self.n + count)

    @cached_property
    def dual(self) -> "BinaryLinearCode":
        return BinaryLinearCode(gf2_null_space(self.generator, self.n), self.n)

    def minimum_distance(self, cap: int = ENUMERATION_MAX_DIM) -> int:
        """Minimum nonzero weight; ``n + 1`` for the zero code by convention."""
        if self.k == 0:
            return self.n + 1
        weights = self.codewords(cap)[1:].sum(axis=1)
        return int(weights.min())

    def dual_distance(self, cap: int = ENUMERATION_MAX_DIM) -> int:
        return self.dual.minimum_distance(cap)

    def write(self, path) -> None:
        """Generator matrix as text rows of 0/1."""
        with open(path, "w", newline="\n") as fh:
            for row in self.generator:
                fh.write("".join(str(int(b)) for b in row) + "\n")

    @classmethod
    def read(cls, path) -> "BinaryLinearCode":
        with open(path) as fh:
            rows = [ln.strip() for ln in fh if ln.strip()]
        if not rows:
            raise ValueError("empty generator file; give the length to build a zero code")
        return cls.from_rows([[int(ch) for ch in r] for r in rows])


def dual_code(code: BinaryLinearCode) -> BinaryLinearCode:
    return code.dual


def code_strength(code: BinaryLinearCode, cap: int = ENUMERATION_MAX_DIM) -> int:
    """Largest t with every t-column projection uniform: dual distance - 1."""
    return min(code.dual_distance(cap) - 1, code.n)


def strength_by_projection(code: BinaryLinearCode,
                           max_n: int = STRENGTH_BRUTE_FORCE_MAX_N) -> int:
    """Strength by counting codeword patterns on every column subset."""
    if code.n > max_n:
        raise ValueError(f"length {code.n} above the brute-force cap {max_n}")
    words = code.codewords().astype(np.int64)
    total = words.shape[0]
    strength = 0
    for t in range(1, code.n + 1):
        if 2 ** t > total:
            break
        expected = total >> t
        weights = 1 << np.arange(t)
        for cols in combinations(range(code.n), t):
            counts = np.bincount(words[:, cols] @ weights, minlength=2 ** t)
            if np.any(counts != expected):
                return strength
        strength = t
    return strength


# --------------------------------------------------------------------------
# GF(2**m) and BCH codes

# primitive polynomials, bit i = coefficient of x**i
PRIMITIVE_POLYNOMIALS = {
    2: 0b111,          # x^2 + x + 1
    3: 0b1011,         # x^3 + x + 1
    4: 0b10011,        # x^4 + x + 1
    5: 0b100101,       # x^5 + x^2 + 1
    6: 0b1000011,      # x^6 + x + 1
    7: 0b10001001,     # x^7 + x^3 + 1
    8: 0b100011101,    # x^8 + x^4 + x^3 + x^2 + 1
}


class GaloisField:
    """GF(2**m) via exponent/log tables of a fixed primitive polynomial."""

    def __init__(self, m: int):
        if m not in PRIMITIVE_POLYNOMIALS:
            raise ValueError(f"GF(2^{m}) not supported (m in 2..8)")
        self.m = m
        self.order = 2 ** m - 1
        poly = PRIMITIVE_POLYNOMIALS[m]
        exp = np.zeros(2 * self.order, dtype=np.int64)
        log = np.full(self.order + 1, -1, dtype=np.int64)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> m:
                x ^= poly
        exp[self.order:] = exp[: self.order]
        self.exp = exp
        self.log = log

    def is_primitive(self) -> bool:
        return len(set(self.exp[: self.order].tolist())) == self.order

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp[self.log[a] + self.log[b]])

    def cyclotomic_coset(self, s: int) -> list[int]:
        coset, e = [], s % self.order
        while e not in coset:
            coset.append(e)
            e = (2 * e) % self.order
        return coset

    def minimal_polynomial(self, s: int) -> np.ndarray:
        """Binary coefficients (lowest degree first) of the minimal poly of alpha**s."""
        poly = [1]  # field elements, lowest degree first
        for e in self.cyclotomic_coset(s):
            root = int(self.exp[e])
            nxt = [0] * (len(poly) + 1)
            for i, c in enumerate(poly):
                nxt[i + 1] ^= c
                nxt[i] ^= self.mul(c, root)
            poly = nxt
        if any(c not in (0, 1) for c in poly):
            raise ArithmeticError("minimal polynomial is not binary")
        return np.array(poly, dtype=np.uint8)


def _gf2_poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (np.convolve(a.astype(np.int64), b.astype(np.int64)) & 1).astype(np.uint8)


@dataclass(frozen=True)
class BchCode:
    """Narrow-sense binary BCH code of length ``2**m - 1``."""

    m: int
    designed_distance: int
    generator_polynomial: np.ndarray = field(repr=False)
    code: BinaryLinearCode = field(repr=False)

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def k(self) -> int:
        return self.code.k


def bch_code(m: int, designed_distance: int) -> BchCode:
    gf = GaloisField(m)
    n = gf.order
    if not 2 <= designed_distance <= n:
        raise ValueError(f"designed distance must lie in 2..{n}")
    seen: set[int] = set()
    g = np.ones(1, dtype=np.uint8)
    for s in range(1, designed_distance):
        if s in seen:
            continue
        seen.update(gf.cyclotomic_coset(s))
        g = _gf2_poly_mul(g, gf.minimal_polynomial(s))
    deg = len(g) - 1
    k = n - deg
    if k < 1:
        raise ValueError(f"designed distance {designed_distance} leaves no information bits")
    rows = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        rows[i, i:i + deg + 1] = g
    return BchCode(m, designed_distance, g, BinaryLinearCode(rows, n))


@dataclass(frozen=True)
class Balancer:
    """A balancing code with the evidence behind its reported strength."""

    code: BinaryLinearCode
    bch: BchCode
    strength_lower_bound: int
    strength_exact: int | None


def bch_dual_balancer(m: int, designed_distance: int,
                      exact_cap: int = 16) -> Balancer:
    """Dual of the narrow-sense BCH code, used as a sign-balancing set.

    The dual distance of the balancer is the minimum distance of the BCH code,
    which the BCH bound puts at ``>= designed_distance``; the strength is
    therefore at least ``designed_distance - 1``. When the BCH code is small
    enough to enumerate the exact strength is computed as well.
    """
    bch = bch_code(m, designed_distance)
    balancer = bch.code.dual
    exact = None
    if bch.k <= exact_cap:
        exact = bch.code.minimum_distance() - 1
        if exact < designed_distance - 1:
            raise ArithmeticError("BCH bound violated; field tables are inconsistent")
    return Balancer(balancer, bch, designed_distance - 1, exact)
