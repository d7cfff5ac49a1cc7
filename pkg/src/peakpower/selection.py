"""Multiple-signal-representation peak reduction: SLM, PTS and MIMO policies.

A metric is any callable mapping time signals (last axis = samples) to a
value per signal, e.g. :func:`peakpower.metrics.papr`. Selection always
minimises the metric, evaluates candidates in index order and breaks ties
towards the lowest index. Candidate 0 is the identity mapping, so no policy
can make a frame worse than leaving it alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator

import numpy as np

from .metrics import papr
from .ofdm import synthesize

Metric = Callable[[np.ndarray], np.ndarray]

QPSK_PHASES = np.array([1, 1j, -1, -1j])
PTS_DEFAULT_CAP = 2 ** 16


def _check_frame(frame) -> np.ndarray:
    frame = np.asarray(frame, dtype=complex)
    if frame.ndim != 1:
        raise ValueError("expected a single frame (1-D array)")
    if not np.any(frame):
        raise ValueError("all-zero frame has no defined peak metric")
    return frame


def evaluate(frames, metric: Metric = papr, oversample: int = 4) -> np.ndarray:
    """Metric of one or more frames after oversampled synthesis."""
    return np.asarray(metric(synthesize(frames, oversample)), dtype=float)


@dataclass(frozen=True)
class SelectionOutcome:
    frame: np.ndarray = field(repr=False)
    index: int
    metric: float
    evaluated: int
    side_info: tuple = ()


@dataclass(frozen=True)
class CandidateGenerator:
    """Fixed family of carrier-wise multipliers.

    SLM kinds hold a ``(U, N)`` array of unit-modulus vectors whose row 0 is
    all ones. The PTS kind holds a block label per carrier and the phase
    alphabet; its candidates are enumerated lazily.
    """

    kind: str
    vectors: np.ndarray | None = field(default=None, repr=False)
    blocks: np.ndarray | None = field(default=None, repr=False)
    alphabet: tuple = (1, -1)

    def __post_init__(self):
        if self.kind in ("phase", "scramble"):
            v = np.asarray(self.vectors, dtype=complex)
            if v.ndim != 2 or v.shape[0] < 1:
                raise ValueError("SLM generator needs a (U, N) array of vectors")
            if not np.allclose(np.abs(v), 1.0, atol=1e-12):
                raise ValueError("SLM vectors must be unit modulus entrywise")
            if not np.all(v[0] == 1):
                raise ValueError("candidate 0 must be the identity mapping")
            v.setflags(write=False)
            object.__setattr__(self, "vectors", v)
        elif self.kind == "pts":
            b = np.asarray(self.blocks, dtype=np.int64)
            if b.ndim != 1 or b.size == 0:
                raise ValueError("PTS needs one block label per carrier")
            labels = np.unique(b)
            if not np.array_equal(labels, np.arange(labels.size)):
                raise ValueError("PTS block labels must be 0..V-1 with no gaps")
            alphabet = tuple(complex(a) for a in self.alphabet)
            if not alphabet:
                raise ValueError("PTS phase alphabet must be non-empty")
            if not np.allclose(np.abs(alphabet), 1.0):
                raise ValueError("PTS phases must be unit modulus")
            if 1 not in alphabet:
                raise ValueError("PTS alphabet must contain 1 so the identity is a candidate")
            # identity first so combination 0 leaves the frame unchanged
            alphabet = (1 + 0j,) + tuple(a for a in alphabet if a != 1)
            b.setflags(write=False)
            object.__setattr__(self, "blocks", b)
            object.__setattr__(self, "alphabet", alphabet)
        else:
            raise ValueError(f"unknown candidate kind {self.kind!r}")

    @classmethod
    def slm_phases(cls, n: int, count: int, rng: np.random.Generator) -> "CandidateGenerator":
        """Identity plus ``count - 1`` vectors of uniform QPSK phases."""
        v = QPSK_PHASES[rng.integers(0, 4, size=(count, n))]
        v[0] = 1
        return cls("phase", v)

    @classmethod
    def binary_scrambling(cls, n: int, count: int, rng: np.random.Generator) -> "CandidateGenerator":
        v = 1.0 - 2.0 * rng.integers(0, 2, size=(count, n))
        v[0] = 1
        return cls("scramble", v.astype(complex))

    @classmethod
    def pts(cls, n: int, subblocks: int, alphabet=(1, -1),
            partition: str = "adjacent") -> "CandidateGenerator":
        if not 1 <= subblocks <= n:
            raise ValueError("need 1 <= V <= N sub-blocks")
        if partition == "adjacent":
            blocks = (np.arange(n) * subblocks) // n
        elif partition == "interleaved":
            blocks = np.arange(n) % subblocks
        else:
            raise ValueError(f"unknown partition {partition!r}")
        return cls("pts", blocks=blocks, alphabet=tuple(alphabet))

    @property
    def n(self) -> int:
        return self.vectors.shape[1] if self.vectors is not None else self.blocks.size

    @property
    def subblocks(self) -> int:
        return int(self.blocks.max()) + 1

    @property
    def count(self) -> int:
        if self.kind == "pts":
            return len(self.alphabet) ** (self.subblocks - 1)
        return self.vectors.shape[0]

    def pts_phases(self, index: int) -> tuple:
        """Block phases of combination ``index`` (block 0 always gets 1)."""
        q = len(self.alphabet)
        out = [1 + 0j]
        for _ in range(self.subblocks - 1):
            index, r = divmod(index, q)
            out.append(self.alphabet[r])
        return tuple(out)

    def multiplier(self, index: int) -> np.ndarray:
        if self.kind == "pts":
            return np.asarray(self.pts_phases(index))[self.blocks]
        return self.vectors[index]


def slm_select(frame, generator: CandidateGenerator, metric: Metric = papr,
               oversample: int = 4) -> SelectionOutcome:
    """Evaluate all SLM candidates and keep the best one."""
    frame = _check_frame(frame)
    if generator.kind == "pts":
        return pts_select(frame, generator, metric, oversample)
    candidates = frame * generator.vectors
    values = evaluate(candidates, metric, oversample)
    best = int(np.argmin(values))
    return SelectionOutcome(candidates[best], best, float(values[best]), len(values))


def pts_select(frame, generator: CandidateGenerator, metric: Metric = papr,
               oversample: int = 4, cap: int = PTS_DEFAULT_CAP,
               budget: int | None = None,
               rng: np.random.Generator | None = None) -> SelectionOutcome:
    """Search block phase combinations, first block's phase held at 1.

    The search is exhaustive unless the number of combinations exceeds
    ``cap``, in which case a ``budget`` (and an ``rng``) must be given; the
    budgeted search scores the identity plus ``budget - 1`` random
    combinations.
    """
    frame = _check_frame(frame)
    if generator.kind != "pts":
        raise ValueError("pts_select needs a PTS generator")
    v = generator.subblocks
    parts = np.zeros((v, frame.size), dtype=complex)
    parts[generator.blocks, np.arange(frame.size)] = frame
    partial = synthesize(parts, oversample)
    total = generator.count
    alphabet = np.asarray(generator.alphabet)
    if budget is None:
        if total > cap:
            raise ValueError(
                f"{total} PTS combinations exceed the cap of {cap}; pass budget= for a budgeted search")
        combos = np.array(list(product(range(len(alphabet)), repeat=v - 1)), dtype=np.int64)
        combos = combos.reshape(total, v - 1)[:, ::-1]
        indices = np.arange(total)
    else:
        if rng is None:
            raise ValueError("budgeted PTS search needs an rng")
        draws = max(int(budget) - 1, 0)
        indices = np.concatenate(([0], rng.integers(0, total, size=draws)))
        combos = np.array([[(i // len(alphabet) ** j) % len(alphabet) for j in range(v - 1)]
                           for i in indices], dtype=np.int64).reshape(len(indices), v - 1)
    weights = np.hstack((np.ones((len(combos), 1), dtype=complex), alphabet[combos]))
    signals = weights @ partial
    values = np.asarray(metric(signals), dtype=float)
    best = int(np.argmin(values))
    chosen = frame * weights[best][generator.blocks]
    return SelectionOutcome(chosen, int(indices[best]), float(values[best]), len(values),
                            side_info=tuple(weights[best]))


def threshold_select(frame, candidates: Iterable[np.ndarray], metric: Metric = papr,
                     threshold: float = np.inf, oversample: int = 4,
                     budget: int | None = None) -> tuple[SelectionOutcome, int]:
    """Assess candidates one by one until the metric is at most ``threshold``.

    ``candidates`` yields carrier multipliers and should start with the
    identity. Returns the accepted (or best-so-far) outcome and the number of
    candidates assessed.
    """
    frame = _check_frame(frame)
    best = None
    count = 0
    for index, mult in enumerate(candidates):
        if budget is not None and count >= budget:
            break
        cand = frame * mult
        value = float(evaluate(cand, metric, oversample))
        count += 1
        if best is None or value < best.metric:
            best = SelectionOutcome(cand, index, value, count)
        if value <= threshold:
            break
    if best is None:
        raise ValueError("candidate stream was empty")
    return SelectionOutcome(best.frame, best.index, best.metric, count), count


def scrambling_stream(n: int, rng: np.random.Generator,
                      phases: np.ndarray = QPSK_PHASES) -> Iterator[np.ndarray]:
    """Identity followed by an endless supply of independent random phase vectors."""
    yield np.ones(n, dtype=complex)
    while True:
        yield phases[rng.integers(0, len(phases), size=n)]


@dataclass(frozen=True)
class MimoSelectionPolicy:
    """How candidate assessment is shared between antennas.

    ``budget`` is the total number of candidate evaluations for ``directed``;
    ``ordinary`` and ``simplified`` use every row of the generator and
    ``threshold`` stops each antenna at ``threshold``.
    """

    kind: str = "ordinary"
    threshold: float = np.inf
    budget: int | None = None

    def __post_init__(self):
        if self.kind not in ("ordinary", "simplified", "directed", "threshold"):
            raise ValueError(f"unknown MIMO policy {self.kind!r}")
        if self.kind == "threshold" and not np.isfinite(self.threshold):
            raise ValueError("threshold policy needs a finite threshold")
        if self.kind == "directed" and (self.budget is None or self.budget < 1):
            raise ValueError("directed policy needs a positive candidate budget")


@dataclass(frozen=True)
class MimoOutcome:
    outcomes: tuple
    objective: float
    evaluations: int

    @property
    def codeword(self) -> np.ndarray:
        return np.stack([o.frame for o in self.outcomes])

    @property
    def indices(self) -> tuple:
        return tuple(o.index for o in self.outcomes)


def mimo_select(codeword, generator: CandidateGenerator, metric: Metric = papr,
                policy: MimoSelectionPolicy = MimoSelectionPolicy(),
                oversample: int = 4) -> MimoOutcome:
    """Peak reduction over the N_t antenna frames of a space-frequency codeword.

    The objective reported is the worst antenna's metric.
    """
    cw = np.atleast_2d(np.asarray(codeword, dtype=complex))
    if generator.kind == "pts":
        raise ValueError("MIMO policies use SLM generators")
    if cw.shape[1] != generator.n:
        raise ValueError("codeword and generator disagree on N")
    for row in cw:
        _check_frame(row)
    vectors = generator.vectors
    kind = policy.kind

    if kind == "ordinary":
        outs = tuple(slm_select(row, generator, metric, oversample) for row in cw)
        return MimoOutcome(outs, max(o.metric for o in outs), sum(o.evaluated for o in outs))

    if kind == "simplified":
        cands = cw[:, None, :] * vectors[None, :, :]
        values = evaluate(cands, metric, oversample)          # (N_t, U)
        worst = values.max(axis=0)
        u = int(np.argmin(worst))
        outs = tuple(SelectionOutcome(cands[a, u], u, float(values[a, u]), values.shape[1])
                     for a in range(cw.shape[0]))
        return MimoOutcome(outs, float(worst[u]), values.size)

    if kind == "threshold":
        outs = []
        for row in cw:
            out, _ = threshold_select(row, iter(vectors), metric, policy.threshold,
                                      oversample, policy.budget)
            outs.append(out)
        outs = tuple(outs)
        return MimoOutcome(outs, max(o.metric for o in outs), sum(o.evaluated for o in outs))

    # directed: spend each further candidate on the currently worst antenna
    n_t = cw.shape[0]
    budget = int(policy.budget)
    if budget < n_t:
        raise ValueError("directed budget must cover the identity candidate of every antenna")
    best_val = evaluate(cw, metric, oversample).astype(float)
    best_idx = np.zeros(n_t, dtype=np.int64)
    next_idx = np.ones(n_t, dtype=np.int64)
    spent = n_t
    while spent < budget:
        a = int(np.argmax(best_val))
        if next_idx[a] >= vectors.shape[0]:
            break
        u = int(next_idx[a])
        value = float(evaluate(cw[a] * vectors[u], metric, oversample))
        spent += 1
        next_idx[a] += 1
        if value < best_val[a]:
            best_val[a] = value
            best_idx[a] = u
    outs = tuple(SelectionOutcome(cw[a] * vectors[best_idx[a]], int(best_idx[a]),
                                  float(best_val[a]), int(next_idx[a]))
                 for a in range(n_t))
    return MimoOutcome(outs, float(best_val.max()), spent)


def slm_metrics(frames, vectors, metric: Metric = papr, oversample: int = 4) -> np.ndarray:
    """Metric of every candidate of every frame, shape ``(T, U)``.

    Batch form of :func:`slm_select` used by the Monte-Carlo harness.
    """
    frames = np.asarray(frames, dtype=complex)
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.ndim == 2:
        cands = frames[:, None, :] * vectors[None, :, :]
    else:
        cands = frames[:, None, :] * vectors
    return evaluate(cands, metric, oversample)


def inverse_mapping(codeword, generator: CandidateGenerator, index: int) -> np.ndarray:
    """Undo candidate ``index`` on every antenna frame (receiver side)."""
    return np.asarray(codeword) * np.conj(generator.multiplier(index))
