"""Sequential sign decisions by minimising a conditional bound.

A sign overlay ``A in {+1, -1}**N`` multiplies the frame carrier by carrier.
The signs are fixed one decision at a time; each decision keeps the branch
whose conditional bound (expectation over the still-random signs) is smaller,
so the bound can only go down and ends at a value no worse than the average
over uniformly random signs.

Two oracles are provided:

* :class:`ChernoffSurrogate` bounds the peak by the exponential moment
  ``G = sum_{k, phi} exp(lam * Re(exp(j*phi) * s[k]))``. Its conditional
  expectation has the closed form used by :func:`chernoff_bound`.
* :class:`MonteCarloOracle` estimates the conditional mean of any metric by
  sampling completions, with common random numbers for the two branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .codes import ENUMERATION_MAX_DIM, BinaryLinearCode
from .metrics import papr
from .ofdm import synthesize
from .selection import SelectionOutcome, evaluate

_LOG2 = np.log(2.0)
_CHUNK_FRAMES = 64
_BALANCE_CHUNK = 1024
# branch scores closer than this (relative) count as a tie, so rounding
# noise on symmetric frames cannot flip a decision
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DecisionSpace:
    """Ordered decisions, each flipping one group of carriers together.

    Singleton groups over all carriers give sequence balancing, singletons
    over a subset give the tone-reservation flavour and one group per PTS
    sub-block gives the PTS flavour. Carriers outside every group keep the
    sign +1.
    """

    n: int
    groups: tuple = field(repr=False)

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        flat = [i for g in groups for i in g]
        if any(len(g) == 0 for g in groups):
            raise ValueError("decision groups must be non-empty")
        if len(set(flat)) != len(flat):
            raise ValueError("carrier indices in a decision space must be distinct")
        if flat and (min(flat) < 0 or max(flat) >= self.n):
            raise ValueError(f"carrier indices must lie in 0..{self.n - 1}")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def full(cls, n: int) -> "DecisionSpace":
        return cls(n, tuple((i,) for i in range(n)))

    @classmethod
    def subset(cls, indices, n: int) -> "DecisionSpace":
        return cls(n, tuple((int(i),) for i in indices))

    @classmethod
    def blocks(cls, n: int, subblocks: int, partition: str = "adjacent") -> "DecisionSpace":
        """One decision per sub-block; the first block is flipped too (global sign is free)."""
        if partition == "adjacent":
            labels = (np.arange(n) * subblocks) // n
        elif partition == "interleaved":
            labels = np.arange(n) % subblocks
        else:
            raise ValueError(f"unknown partition {partition!r}")
        return cls(n, tuple(tuple(np.flatnonzero(labels == v)) for v in range(subblocks)))

    @property
    def size(self) -> int:
        return len(self.groups)

    @property
    def indices(self) -> np.ndarray:
        """Representative (first) carrier of every decision."""
        return np.array([g[0] for g in self.groups], dtype=np.int64)

    @property
    def fraction(self) -> float:
        return self.size / self.n

    def free_carriers(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        for g in self.groups:
            mask[list(g)] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class SignVector:
    """Signs per carrier: +1, -1, or 0 for still random."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int8)
        if v.ndim != 1 or not np.isin(v, (-1, 0, 1)).all():
            raise ValueError("sign vector entries must be +1, -1 or 0 (unset)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def unset(cls, n: int) -> "SignVector":
        return cls(np.zeros(n, dtype=np.int8))

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def fixed_count(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def complete(self) -> bool:
        return self.fixed_count == self.n

    def fix(self, carriers, sign: int) -> "SignVector":
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        v = self.values.copy()
        v[np.asarray(carriers)] = sign
        return SignVector(v)

    def signs(self) -> np.ndarray:
        if not self.complete:
            raise ValueError("sign vector still has unset entries")
        return self.values.astype(float)


@dataclass(frozen=True)
class ChernoffSurrogate:
    """Exponential-moment peak surrogate with an even-sized phase grid.

    ``lam=None`` picks ``sqrt(2 ln(P * I * N))`` at use, with P the number
    of phases (4 by default).
    """

    lam: float | None = None
    phases: int = 4

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.phases < 2 or self.phases % 2:
            raise ValueError("phase grid size must be an even number >= 2")

    def resolve_lam(self, n: int, oversample: int) -> float:
        if self.lam is not None:
            return float(self.lam)
        return float(np.sqrt(2.0 * np.log(self.phases * oversample * n)))

    @property
    def grid(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.phases) / self.phases


@dataclass(frozen=True)
class MonteCarloOracle:
    """Sampled conditional mean of an arbitrary metric on time signals."""

    metric: Callable = papr
    samples: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample")


@dataclass(frozen=True)
class DerandResult:
    signs: SignVector
    frame: np.ndarray = field(repr=False)
    trace: np.ndarray = field(repr=False)
    decisions: np.ndarray = field(repr=False)


def _twiddles(n: int, oversample: int) -> np.ndarray:
    """``tw[m, k] = exp(2j*pi*k*m/(I*N)) / sqrt(N)``."""
    total = oversample * n
    km = np.outer(np.arange(n), np.arange(total)) % total
    return np.exp(2j * np.pi * km / total) / np.sqrt(n)


def _logcosh(z):
    return np.logaddexp(z, -z) - _LOG2


def _group_of(space: DecisionSpace | None, n: int) -> DecisionSpace:
    if space is None:
        return DecisionSpace.full(n)
    if space.n != n:
        raise ValueError(f"decision space is for N={space.n}, frame has N={n}")
    return space


def chernoff_log_bound(state: SignVector, frame, surrogate: ChernoffSurrogate = ChernoffSurrogate(),
                       oversample: int = 4, space: DecisionSpace | None = None) -> float:
    """Natural log of the conditional Chernoff bound, evaluated directly.

    Unset groups contribute ``log cosh(lam * u)`` of their summed
    contribution, fixed carriers ``lam * A_n * u``. Carriers outside the
    decision space must already be fixed.
    """
    c = np.asarray(frame, dtype=complex)
    n = c.size
    if state.n != n:
        raise ValueError("state and frame lengths differ")
    space = _group_of(space, n)
    lam = surrogate.resolve_lam(n, oversample)
    a = state.values
    unset_groups = []
    for g in space.groups:
        vals = a[list(g)]
        if np.all(vals == 0):
            unset_groups.append(g)
        elif np.any(vals == 0) or np.any(vals != vals[0]):
            raise ValueError("carriers of one decision group must share one sign")
    in_unset = np.zeros(n, dtype=bool)
    for g in unset_groups:
        in_unset[list(g)] = True
    if np.any((a == 0) & ~in_unset):
        raise ValueError("carriers outside the decision space must be fixed")

    tw = _twiddles(n, oversample)
    rot = np.exp(1j * surrogate.grid)[:, None]
    fixed = a != 0
    x_fixed = (a[fixed] * c[fixed]) @ tw[fixed]
    log_terms = lam * (rot * x_fixed[None, :]).real
    for g in unset_groups:
        idx = list(g)
        x = c[idx] @ tw[idx]
        log_terms = log_terms + _logcosh(lam * (rot * x[None, :]).real)
    top = log_terms.max()
    return float(top + np.log(np.sum(np.exp(log_terms - top))))


def chernoff_bound(state: SignVector, frame, surrogate: ChernoffSurrogate = ChernoffSurrogate(),
                   oversample: int = 4, space: DecisionSpace | None = None) -> float:
    """Conditional Chernoff bound ``G`` (may overflow to inf; see :func:`chernoff_log_bound`)."""
    with np.errstate(over="ignore"):
        return float(np.exp(chernoff_log_bound(state, frame, surrogate, oversample, space)))


def _group_contributions(c, tw, group):
    # (T, I*N) time contribution of one decision group
    if len(group) == 1:
        m = group[0]
        return c[:, m, None] * tw[m][None, :]
    idx = list(group)
    return c[:, idx] @ tw[idx]


def _log_cosh_sum(c, tw, groups, lam, cos_p, sin_p):
    """sum over groups of log cosh(lam * u), shape (T, P/2, K)."""
    t = c.shape[0]
    out = np.zeros((t, cos_p.size, tw.shape[1]))
    prod = np.ones_like(out)
    pending = 0
    for g in groups:
        x = _group_contributions(c, tw, g)
        z = lam * (cos_p[None, :, None] * x.real[:, None, :] - sin_p[None, :, None] * x.imag[:, None, :])
        if np.max(np.abs(z)) < 80.0:
            # products of up to 8 cosh values below e**80 cannot overflow
            prod *= np.cosh(z)
            pending += 1
            if pending == 8:
                out += np.log(prod)
                prod.fill(1.0)
                pending = 0
        else:
            out += _logcosh(z)
    if pending:
        out += np.log(prod)
    return out


def _derandomize_chernoff_block(c, space, lam, phases, oversample, tw):
    t, n = c.shape
    half = phases // 2
    phi = 2.0 * np.pi * np.arange(half) / phases
    cos_p, sin_p = np.cos(phi), np.sin(phi)

    free = space.free_carriers()
    x_free = c[:, free] @ tw[free] if free.size else np.zeros((t, tw.shape[1]), complex)
    u_free = cos_p[None, :, None] * x_free.real[:, None, :] - sin_p[None, :, None] * x_free.imag[:, None, :]
    shared = _log_cosh_sum(c, tw, space.groups, lam, cos_p, sin_p)
    # phase p + P/2 flips the sign of every real part: keep both halves
    log_wp = shared + lam * u_free
    log_wm = shared - lam * u_free
    top = np.maximum(log_wp.max(axis=(1, 2)), log_wm.max(axis=(1, 2)))
    wp = np.exp(log_wp - top[:, None, None])
    wm = np.exp(log_wm - top[:, None, None])
    total = wp.sum(axis=(1, 2)) + wm.sum(axis=(1, 2))
    trace = np.empty((t, space.size + 1))
    trace[:, 0] = top + np.log(total)
    wp /= total[:, None, None]
    wm /= total[:, None, None]

    decisions = np.empty((t, space.size), dtype=np.int8)
    for i, g in enumerate(space.groups):
        x = _group_contributions(c, tw, g)
        th = np.tanh(lam * (cos_p[None, :, None] * x.real[:, None, :]
                            - sin_p[None, :, None] * x.imag[:, None, :]))
        s = wp.sum(axis=(1, 2)) + wm.sum(axis=(1, 2))
        d = np.einsum("tpk,tpk->t", wp - wm, th)
        a = np.where(d <= _TIE_RTOL * s, 1, -1).astype(np.int8)
        decisions[:, i] = a
        # chosen branch has bound S - |D|; log1p keeps the trace monotone exactly
        trace[:, i + 1] = trace[:, i] + np.log1p(-np.minimum(np.abs(d) / s, 1.0))
        at = a[:, None, None] * th
        wp *= 1.0 + at
        wm *= 1.0 - at
        norm = wp.sum(axis=(1, 2)) + wm.sum(axis=(1, 2))
        norm = np.where(norm > 0, norm, 1.0)
        wp /= norm[:, None, None]
        wm /= norm[:, None, None]
    return decisions, trace


def derandomize_batch(frames, space: DecisionSpace | None = None,
                      surrogate: ChernoffSurrogate = ChernoffSurrogate(),
                      oversample: int = 4):
    """Chernoff-oracle derandomization of a batch of frames.

    Returns ``(signs, trace)``: carrier signs of shape ``(T, N)`` and the log
    bound before the first and after every decision, shape ``(T, D + 1)``.
    Work per decision is ``O(I * N * P)`` per frame.
    """
    c = np.atleast_2d(np.asarray(frames, dtype=complex))
    t, n = c.shape
    space = _group_of(space, n)
    lam = surrogate.resolve_lam(n, oversample)
    tw = _twiddles(n, oversample)
    signs = np.ones((t, n))
    trace = np.empty((t, space.size + 1))
    for lo in range(0, t, _CHUNK_FRAMES):
        hi = min(lo + _CHUNK_FRAMES, t)
        dec, tr = _derandomize_chernoff_block(c[lo:hi], space, lam, surrogate.phases, oversample, tw)
        for i, g in enumerate(space.groups):
            signs[lo:hi, list(g)] = dec[:, i, None]
        trace[lo:hi] = tr
    return signs, trace


def mc_branch_estimates(state: SignVector, frame, group, oracle: MonteCarloOracle,
                        rng: np.random.Generator, oversample: int = 4,
                        space: DecisionSpace | None = None):
    """Sampled conditional means for both signs of ``group``.

    The same completions of the other unset groups are used for both
    branches (common random numbers).
    """
    c = np.asarray(frame, dtype=complex)
    space = _group_of(space, c.size)
    a = state.values.astype(float)
    idx = list(group)
    others = [list(g) for g in space.groups if a[g[0]] == 0 and g[0] != idx[0]]
    draws = oracle.samples if others else 1
    signs = np.tile(a, (draws, 1))
    signs[:, idx] = 0.0
    if others:
        r = 1.0 - 2.0 * rng.integers(0, 2, size=(draws, len(others)))
        for j, g in enumerate(others):
            signs[:, g] = r[:, j, None]
    base = synthesize(signs * c, oversample)
    part = np.zeros_like(c)
    part[idx] = c[idx]
    x = synthesize(part, oversample)
    plus = float(np.mean(oracle.metric(base + x)))
    minus = float(np.mean(oracle.metric(base - x)))
    return plus, minus


def mc_conditional_bound(state: SignVector, frame, metric: Callable = papr, samples: int = 32,
                         rng: np.random.Generator | None = None, oversample: int = 4,
                         space: DecisionSpace | None = None) -> float:
    """Mean of ``metric`` over ``samples`` random completions of the unset signs."""
    if samples < 1:
        raise ValueError("need at least one sample")
    c = np.asarray(frame, dtype=complex)
    space = _group_of(space, c.size)
    a = state.values.astype(float)
    unset = [list(g) for g in space.groups if a[g[0]] == 0]
    if np.any((a == 0) & ~np.isin(np.arange(c.size), [i for g in unset for i in g])):
        raise ValueError("carriers outside the decision space must be fixed")
    if not unset:
        return float(np.asarray(metric(synthesize(a * c, oversample))))
    if rng is None:
        rng = np.random.default_rng()
    signs = np.tile(a, (samples, 1))
    r = 1.0 - 2.0 * rng.integers(0, 2, size=(samples, len(unset)))
    for j, g in enumerate(unset):
        signs[:, g] = r[:, j, None]
    return float(np.mean(metric(synthesize(signs * c, oversample))))


def _derandomize_mc(c, space, oracle, oversample, frame_key):
    state = SignVector(np.where(np.isin(np.arange(c.size), space.free_carriers()), 1, 0))
    trace = np.empty(space.size + 1)
    decisions = np.empty(space.size, dtype=np.int8)
    for i, g in enumerate(space.groups):
        sub = rngmod.stream(oracle.seed, frame_key, rngmod.ORACLE, i)
        plus, minus = mc_branch_estimates(state, c, g, oracle, sub, oversample, space)
        if i == 0:
            trace[0] = 0.5 * (plus + minus)
        a = 1 if plus <= minus + _TIE_RTOL * abs(minus) else -1
        decisions[i] = a
        trace[i + 1] = min(plus, minus)
        state = state.fix(list(g), a)
    if space.size == 0:
        trace[0] = float(np.asarray(oracle.metric(synthesize(c, oversample))))
    return state, decisions, trace


def derandomize(frame, space: DecisionSpace | None = None, oracle=None,
                oversample: int = 4, frame_key: int = 0) -> DerandResult:
    """Fix the signs of ``space`` in order, each by argmin of the oracle (tie -> +1).

    ``oracle`` is a :class:`ChernoffSurrogate` (default) or a
    :class:`MonteCarloOracle`; the latter draws its samples for decision
    ``i`` from the stream ``(oracle.seed, frame_key, ORACLE, i)``. The Chernoff trace
    holds log bounds, the Monte-Carlo trace holds metric estimates.
    """
    c = np.asarray(frame, dtype=complex)
    if c.ndim != 1:
        raise ValueError("derandomize works on one frame; use derandomize_batch for many")
    space = _group_of(space, c.size)
    if oracle is None:
        oracle = ChernoffSurrogate()
    if isinstance(oracle, ChernoffSurrogate):
        signs, trace = derandomize_batch(c[None, :], space, oracle, oversample)
        signs, trace = signs[0], trace[0]
        decisions = np.array([signs[g[0]] for g in space.groups], dtype=np.int8)
        state = SignVector(signs.astype(np.int8))
    elif isinstance(oracle, MonteCarloOracle):
        state, decisions, trace = _derandomize_mc(c, space, oracle, oversample, frame_key)
    else:
        raise TypeError(f"unsupported oracle {type(oracle).__name__}")
    return DerandResult(state, state.values * c, trace, decisions)


def write_trace_csv(path, trace, decisions) -> None:
    """Bound trace as ``step,bound_log,chosen_sign`` rows (step 0 has no sign)."""
    trace = np.asarray(trace, dtype=float)
    with open(path, "w", newline="\n") as fh:
        fh.write("step,bound_log,chosen_sign\n")
        fh.write(f"0,{float(trace[0])!r},\n")
        for i, a in enumerate(decisions, start=1):
            fh.write(f"{i},{float(trace[i])!r},{int(a)}\n")


def sequence_balance(frame, code: BinaryLinearCode, mode: str = "full", draws: int = 64,
                     metric: Callable = papr, oversample: int = 4,
                     rng: np.random.Generator | None = None,
                     cap: int = ENUMERATION_MAX_DIM) -> SelectionOutcome:
    """Best sign overlay ``(-1)**c`` over codewords ``c`` of a balancing code.

    ``mode='full'`` scans every codeword; ``mode='random'`` scores the zero
    word plus ``draws - 1`` uniformly drawn codewords, so the outcome is never
    worse than the unbalanced frame.
    """
    c = np.asarray(frame, dtype=complex)
    if code.n != c.size:
        raise ValueError(f"code length {code.n} differs from N={c.size}")
    if not np.any(c):
        raise ValueError("all-zero frame has no defined peak metric")
    if mode == "full":
        words = code.codewords(cap)
    elif mode == "random":
        if rng is None:
            raise ValueError("random balancing needs an rng")
        if draws < 1:
            raise ValueError("need at least one draw")
        words = np.vstack((np.zeros((1, code.n), dtype=np.uint8),
                           code.random_codewords(rng, draws - 1)))
    else:
        raise ValueError(f"unknown balancing mode {mode!r}")
    values = np.empty(words.shape[0])
    for lo in range(0, words.shape[0], _BALANCE_CHUNK):
        w = words[lo:lo + _BALANCE_CHUNK]
        values[lo:lo + w.shape[0]] = evaluate((1.0 - 2.0 * w) * c, metric, oversample)
    best = int(np.argmin(values))
    chosen = (1.0 - 2.0 * words[best]) * c
    return SelectionOutcome(chosen, best, float(values[best]), words.shape[0],
                            side_info=tuple(int(b) for b in words[best]))
