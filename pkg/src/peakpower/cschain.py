"""Clipping-noise cancellation by sparse recovery at the OFDM receiver.

The chain runs at Nyquist rate with the unitary DFT ``F`` (``D = F d``) so
that clipping noise ``d`` is sparse in time when clips are rare. Measurements
of ``F d`` come either from reserved (empty) tones or from data tones whose
hard decisions look reliable; orthogonal matching pursuit then estimates
``d`` and the receiver subtracts ``F d_hat`` before deciding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .hpa import HpaModel, apply_hpa, clip_amplitude
from .ofdm import Constellation, analyze, synthesize

RIP_ENUMERATION_CAP = 200_000
# half the distance from a QPSK point to the nearest decision boundary
DEFAULT_RELIABILITY_RADIUS = 0.5 / np.sqrt(2.0)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT, ``F[r, k] = exp(-2j*pi*r*k/N) / sqrt(N)``."""
    rk = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * rk / n) / np.sqrt(n)


@dataclass(frozen=True)
class ClippingNoise:
    d: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    sparsity: np.ndarray | int


def clipping_noise(frame, model: HpaModel) -> ClippingNoise:
    """``d = g(s) - s`` at Nyquist rate and its spectrum ``D = F d``.

    The nominal sparsity counts samples above the limiter level for the soft
    and Rapp models, and samples the amplifier changes at all otherwise.
    """
    s = synthesize(frame, 1)
    d = apply_hpa(s, model) - s
    if model.kind in ("soft", "rapp"):
        count = np.count_nonzero(np.abs(s) > model.level, axis=-1)
    else:
        count = np.count_nonzero(np.abs(d) > 1e-12 * np.max(np.abs(s), initial=0.0), axis=-1)
    return ClippingNoise(d, analyze(d, 1), count if np.ndim(count) else int(count))


def clip_level_for_sparsity(n: int, expected_clips: float, power: float = 1.0) -> float:
    """Amplitude exceeded by ``expected_clips`` of ``n`` samples of a complex Gaussian of given power."""
    if not 0 < expected_clips < n:
        raise ValueError("expected clip count must lie strictly between 0 and N")
    return float(np.sqrt(power * np.log(n / expected_clips)))


@dataclass(frozen=True)
class ChannelModel:
    """``Y = H (C + D) + Z`` with diagonal ``H`` and white Gaussian ``Z``."""

    kind: str = "awgn"
    sigma2: float = 0.0
    gains: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("awgn", "fading"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not self.sigma2 >= 0:
            raise ValueError("noise variance must be non-negative")
        if self.kind == "fading":
            h = np.asarray(self.gains, dtype=complex)
            if h.ndim < 1 or np.any(h == 0):
                raise ValueError("fading gains must all be nonzero")
            h.setflags(write=False)
            object.__setattr__(self, "gains", h)

    @classmethod
    def awgn(cls, sigma2: float = 0.0) -> "ChannelModel":
        return cls("awgn", float(sigma2))

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "ChannelModel":
        """AWGN with unit symbol energy over noise variance ``snr_db``."""
        return cls.awgn(10.0 ** (-snr_db / 10.0))

    @classmethod
    def fading(cls, gains, sigma2: float = 0.0) -> "ChannelModel":
        return cls("fading", float(sigma2), gains)

    @property
    def h(self):
        return 1.0 if self.kind == "awgn" else self.gains

    def noise(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.sigma2 == 0:
            return np.zeros(shape, dtype=complex)
        z = rng.standard_normal(tuple(shape) + (2,))
        return np.sqrt(self.sigma2 / 2.0) * (z[..., 0] + 1j * z[..., 1])

    def equalize(self, y) -> np.ndarray:
        return np.asarray(y, dtype=complex) / self.h


def transmit(frame, noise: ClippingNoise, channel: ChannelModel,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """Received tones ``Y = H (C + D) + Z``."""
    c = np.asarray(frame, dtype=complex)
    if channel.sigma2 > 0 and rng is None:
        raise ValueError("a noisy channel needs an rng")
    z = channel.noise(rng, c.shape) if channel.sigma2 > 0 else 0.0
    return channel.h * (c + noise.D) + z


@dataclass(frozen=True)
class ToneSelection:
    """Which tones serve as measurements.

    ``reserved`` uses a fixed index set of empty tones. ``reliable`` picks the
    ``m`` data tones with the smallest nearest-point distance after
    equalisation (ties by index). ``adaptive`` is the reliable rule with ``m``
    set per frame to the number of tones closer than ``radius`` to a
    constellation point, clamped to ``[m_min, m_max]``.
    """

    kind: str
    indices: tuple = ()
    m: int | None = None
    radius: float = DEFAULT_RELIABILITY_RADIUS
    m_min: int = 1
    m_max: int | None = None

    def __post_init__(self):
        if self.kind not in ("reserved", "reliable", "adaptive"):
            raise ValueError(f"unknown tone selection {self.kind!r}")
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("reserved tone indices must be distinct")
        object.__setattr__(self, "indices", idx)
        if self.kind == "reserved" and not idx:
            raise ValueError("reserved selection needs tone indices")
        if self.kind == "reliable" and (self.m is None or self.m < 1):
            raise ValueError("reliable selection needs a measurement count m >= 1")

    @classmethod
    def reserved(cls, indices) -> "ToneSelection":
        return cls("reserved", tuple(indices))

    @classmethod
    def reliable(cls, m: int) -> "ToneSelection":
        return cls("reliable", m=int(m))

    @classmethod
    def adaptive(cls, radius: float = DEFAULT_RELIABILITY_RADIUS, m_min: int = 1,
                 m_max: int | None = None) -> "ToneSelection":
        return cls("adaptive", radius=float(radius), m_min=int(m_min), m_max=m_max)


@dataclass(frozen=True)
class SensingOperator:
    """Rows of the unitary DFT selected by ``rows``: ``Phi = S F``."""

    n: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64).ravel()
        if rows.size and (rows.min() < 0 or rows.max() >= self.n):
            raise ValueError("sensing rows out of range")
        if len(np.unique(rows)) != rows.size:
            raise ValueError("sensing rows must be distinct")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def m(self) -> int:
        return self.rows.size

    @property
    def matrix(self) -> np.ndarray:
        rk = np.outer(self.rows, np.arange(self.n)) % self.n
        return np.exp(-2j * np.pi * rk / self.n) / np.sqrt(self.n)


def reserved_measurements(y, channel: ChannelModel, selection: ToneSelection):
    """``g = S_r H^-1 Y``; returns ``(g, operator)``."""
    if selection.kind != "reserved":
        raise ValueError("reserved_measurements needs a reserved tone selection")
    ye = channel.equalize(y)
    rows = np.asarray(selection.indices)
    if rows.max() >= ye.shape[-1]:
        raise ValueError("reserved tone index beyond N")
    return ye[..., rows], SensingOperator(ye.shape[-1], rows)


def reliable_mask(y_eq, decisions, selection: ToneSelection, candidates=None) -> np.ndarray:
    """Boolean mask of the tones picked by the reliability rule (batched over leading axes)."""
    if selection.kind not in ("reliable", "adaptive"):
        raise ValueError("reliability rule needs a reliable or adaptive selection")
    ye = np.asarray(y_eq, dtype=complex)
    n = ye.shape[-1]
    pool = np.ones(n, dtype=bool)
    if candidates is not None:
        pool[:] = False
        pool[np.asarray(candidates)] = True
    dist = np.where(pool, np.abs(ye - np.asarray(decisions)), np.inf)
    avail = int(pool.sum())
    if selection.kind == "reliable":
        if selection.m > avail:
            raise ValueError(f"M={selection.m} exceeds the {avail} available tones")
        m = np.full(ye.shape[:-1], selection.m)
    else:
        top = avail if selection.m_max is None else min(selection.m_max, avail)
        close = np.count_nonzero(dist < selection.radius, axis=-1)
        m = np.clip(close, min(selection.m_min, top), top)
    # rank of every tone in the stable distance order
    order = np.argsort(dist, axis=-1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(n) + np.zeros_like(order), axis=-1)
    return rank < np.asarray(m)[..., None]


def reliable_measurements(y, channel: ChannelModel, decisions, selection: ToneSelection,
                          candidates=None):
    """``g = S_d H^-1 Y - S_d C_hat``; returns ``(g, operator)`` for one frame.

    ``candidates`` restricts the tones the rule may pick (default: all).
    """
    ye = channel.equalize(y)
    if ye.ndim != 1:
        raise ValueError("reliable_measurements works on one frame; see reliable_mask")
    c_hat = np.asarray(decisions, dtype=complex)
    rows = np.flatnonzero(reliable_mask(ye, c_hat, selection, candidates))
    return ye[rows] - c_hat[rows], SensingOperator(ye.size, rows)


@dataclass(frozen=True)
class RecoveryConfig:
    """OMP settings: at most ``sparsity`` atoms; stop once ``||r||**2 <= tolerance``."""

    sparsity: int
    tolerance: float = 0.0

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValueError("target sparsity must be >= 1")
        if not self.tolerance >= 0:
            raise ValueError("residual tolerance must be non-negative")


@dataclass(frozen=True)
class OmpResult:
    estimate: np.ndarray = field(repr=False)
    support: tuple
    rank_deficient: bool = False


def omp_recover(phi, g, config: RecoveryConfig) -> OmpResult:
    """Orthogonal matching pursuit on one measurement vector."""
    phi = np.asarray(phi, dtype=complex)
    g = np.asarray(g, dtype=complex)
    m, n = phi.shape
    if m < config.sparsity:
        raise ValueError(f"need M >= S, got M={m}, S={config.sparsity}")
    norms = np.linalg.norm(phi, axis=0)
    norms = np.where(norms > 0, norms, np.inf)
    residual = g.copy()
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    deficient = False
    for _ in range(config.sparsity):
        if np.vdot(residual, residual).real <= config.tolerance:
            break
        corr = np.abs(phi.conj().T @ residual) / norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = phi[:, support]
        coef, _, rank, _ = np.linalg.lstsq(sub, g, rcond=None)
        if rank < len(support):
            deficient = True
        residual = g - sub @ coef
    if deficient:
        warnings.warn("OMP active set is rank deficient; returning the least-squares pseudo-solution",
                      RuntimeWarning, stacklevel=2)
    estimate = np.zeros(n, dtype=complex)
    estimate[support] = coef
    return OmpResult(estimate, tuple(support), deficient)


def omp_batch(phi, g, config: RecoveryConfig, tolerances=None) -> np.ndarray:
    """OMP over a batch, ``phi`` of shape ``(M, N)`` or ``(T, M, N)`` and ``g`` of ``(T, M)``.

    Zero rows (and the matching zero entries of ``g``) are inert, so frames
    with fewer measurements can be padded to a common M. ``tolerances``
    overrides ``config.tolerance`` per frame.
    """
    g = np.asarray(g, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    t, m = g.shape
    if phi.ndim == 2:
        phi = np.broadcast_to(phi, (t,) + phi.shape)
    n = phi.shape[2]
    norms = np.sqrt(np.einsum("tmn,tmn->tn", phi.conj(), phi).real)
    norms = np.where(norms > 0, norms, np.inf)
    s_max = config.sparsity
    support = np.zeros((t, s_max), dtype=np.int64)
    coef = np.zeros((t, s_max), dtype=complex)
    used = np.zeros(t, dtype=np.int64)
    tol = np.broadcast_to(config.tolerance if tolerances is None else np.asarray(tolerances, float), (t,))
    residual = g.copy()
    active = np.einsum("tm,tm->t", residual.conj(), residual).real > tol
    rows = np.arange(t)
    chosen = np.zeros((t, n), dtype=bool)
    for it in range(s_max):
        if not active.any():
            break
        a = np.flatnonzero(active)
        corr = np.abs(np.einsum("tmn,tm->tn", phi[a].conj(), residual[a])) / norms[a]
        corr[chosen[a]] = -1.0
        j = np.argmax(corr, axis=1)
        support[a, it] = j
        chosen[a, j] = True
        used[a] = it + 1
        sub = np.take_along_axis(phi[a], support[a, None, : it + 1], axis=2)
        gram = np.einsum("tmi,tmj->tij", sub.conj(), sub)
        rhs = np.einsum("tmi,tm->ti", sub.conj(), g[a])
        try:
            sol = np.linalg.solve(gram, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            sol = np.stack([np.linalg.lstsq(s_, g[k], rcond=None)[0] for s_, k in zip(sub, a)])
        coef[a, : it + 1] = sol
        residual[a] = g[a] - np.einsum("tmi,ti->tm", sub, sol)
        active[a] = np.einsum("tm,tm->t", residual[a].conj(), residual[a]).real > tol[a]
    estimate = np.zeros((t, n), dtype=complex)
    for it in range(s_max):
        live = used > it
        estimate[rows[live], support[live, it]] += coef[live, it]
    return estimate


@dataclass(frozen=True)
class CancelResult:
    decisions: np.ndarray = field(repr=False)
    bit_errors: int
    bits: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


def cancel_and_decide(y, channel: ChannelModel, d_hat, constellation: Constellation,
                      sent_labels=None, data_tones=None) -> CancelResult:
    """Decide on ``H^-1 Y - F d_hat`` and count bit errors on the data tones."""
    z = channel.equalize(y) - analyze(np.asarray(d_hat, dtype=complex), 1)
    labels = constellation.nearest(z)
    decisions = constellation.points[labels]
    if sent_labels is None:
        return CancelResult(decisions, 0, 0)
    sent_labels = np.asarray(sent_labels)
    tones = np.arange(z.shape[-1]) if data_tones is None else np.asarray(data_tones)
    diff = np.bitwise_xor(labels[..., tones], sent_labels[..., tones])
    errors = int(np.unpackbits(diff.astype(np.uint8)[..., None], axis=-1).sum())
    bits = diff.size * constellation.bits_per_symbol
    return CancelResult(decisions, errors, bits)


def _is_prime(v: int) -> bool:
    if v < 2:
        return False
    return all(v % p for p in range(2, int(v ** 0.5) + 1))


def verify_difference_set(tones, v: int, lam: int) -> bool:
    """Every nonzero residue mod ``v`` occurs exactly ``lam`` times as a difference."""
    t = np.asarray(tones, dtype=np.int64)
    diffs = (t[:, None] - t[None, :]) % v
    counts = np.bincount(diffs[~np.eye(t.size, dtype=bool)], minlength=v)
    return bool(np.all(counts[1:] == lam))


def difference_set_tones(v: int = 59, k: int = 29, lam: int = 14) -> tuple[int, ...]:
    """Quadratic residues mod a prime ``v = 3 (mod 4)``: a ``(v, (v-1)/2, (v-3)/4)`` difference set."""
    if not _is_prime(v):
        raise ValueError(f"v={v} is not prime; the residue construction needs a prime")
    if v % 4 != 3:
        raise ValueError("the residue construction needs v = 3 (mod 4)")
    if k != (v - 1) // 2 or lam != (v - 3) // 4:
        raise ValueError(f"a residue difference set mod {v} has parameters ({v}, {(v - 1) // 2}, {(v - 3) // 4})")
    tones = tuple(sorted({(x * x) % v for x in range(1, v)}))
    if not verify_difference_set(tones, v, lam):
        raise ArithmeticError("residue set failed the difference count")
    return tones


def rip_bruteforce(phi, s: int, cap: int = RIP_ENUMERATION_CAP) -> float:
    """Restricted isometry constant by enumerating all supports of size ``s``.

    Columns are scaled by one common factor so the mean column energy is 1.
    """
    phi = np.asarray(phi, dtype=complex)
    n = phi.shape[1]
    if not 1 <= s <= n:
        raise ValueError("need 1 <= S <= N")
    if comb(n, s) > cap:
        raise ValueError(f"C({n}, {s}) = {comb(n, s)} supports exceed the cap of {cap}")
    scale = np.sqrt(np.mean(np.sum(np.abs(phi) ** 2, axis=0)))
    a = phi / scale
    gram = a.conj().T @ a
    supports = np.array(list(combinations(range(n), s)))
    sub = gram[supports[:, :, None], supports[:, None, :]]
    eig = np.linalg.eigvalsh(sub)
    return float(max(np.max(1.0 - eig[:, 0]), np.max(eig[:, -1] - 1.0), 0.0))


@dataclass(frozen=True)
class LinkConfig:
    """Desk-scale clipping-cancellation link for BER sweeps.

    The clip level is given in dB above the transmitted RMS; ``None`` picks
    the level that ``expected_clips`` samples per frame exceed.
    """

    n: int = 64
    constellation: str = "QPSK"
    clip_db: float | None = None
    expected_clips: float = 4.0
    reserved: tuple = ()
    sparsity: int = 8
    tolerance_factor: float = 2.0
    reliable_m: int | None = None
    radius: float = DEFAULT_RELIABILITY_RADIUS

    def __post_init__(self):
        if not self.reserved:
            object.__setattr__(self, "reserved", difference_set_tones(59, 29, 14))
        if max(self.reserved) >= self.n:
            raise ValueError("reserved tones must lie below N")

    def clip_level_db(self) -> float:
        if self.clip_db is not None:
            return float(self.clip_db)
        return float(20.0 * np.log10(clip_level_for_sparsity(self.n, self.expected_clips)))


@dataclass(frozen=True)
class LinkStats:
    """Totals over a batch of frames.

    ``uncancelled_errors`` decides the same received tones without the
    clipping-noise estimate; ``recovery_error`` and ``clip_power`` are summed
    squared norms of ``d_hat - d`` and ``d``.
    """

    bit_errors: int
    bits: int
    uncancelled_errors: int
    recovery_error: float
    clip_power: float
    frames: int

    def __add__(self, other: "LinkStats") -> "LinkStats":
        return LinkStats(self.bit_errors + other.bit_errors, self.bits + other.bits,
                         self.uncancelled_errors + other.uncancelled_errors,
                         self.recovery_error + other.recovery_error,
                         self.clip_power + other.clip_power, self.frames + other.frames)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def uncancelled_ber(self) -> float:
        return self.uncancelled_errors / self.bits if self.bits else 0.0

    @property
    def cancellation_consistent(self) -> bool:
        """False flags a counterexample: recovery beat doing nothing, yet BER went up."""
        return not (self.recovery_error < self.clip_power and self.bit_errors > self.uncancelled_errors)


def simulate_link(config: LinkConfig, scheme: str, snr_db: float, frames: int,
                  rng: np.random.Generator) -> LinkStats:
    """Bit-error statistics over ``frames`` frames for one scheme and SNR.

    Schemes: ``unclipped`` (baseline), ``none`` (clipped, no cancellation),
    ``reserved`` and ``reliable`` (adaptive-M unless ``reliable_m`` is set).
    BER counts data tones only.
    """
    if scheme not in ("unclipped", "none", "reserved", "reliable"):
        raise ValueError(f"unknown scheme {scheme!r}")
    const = Constellation.from_name(config.constellation)
    n = config.n
    data = np.ones(n, dtype=bool)
    if scheme == "reserved":
        data[list(config.reserved)] = False
    labels = rng.integers(0, const.size, size=(frames, n))
    c = np.where(data, const.points[labels], 0.0)
    rms = np.sqrt(data.mean())
    level = clip_amplitude(config.clip_level_db(), rms)
    hpa = HpaModel.identity() if scheme == "unclipped" else HpaModel.soft_limiter(level)
    noise = clipping_noise(c, hpa)
    channel = ChannelModel.from_snr_db(snr_db)
    y = transmit(c, noise, channel, rng)
    tol = config.tolerance_factor * channel.sigma2
    d_hat = np.zeros((frames, n), dtype=complex)
    if scheme == "reserved":
        g, op = reserved_measurements(y, channel, ToneSelection.reserved(config.reserved))
        d_hat = omp_batch(op.matrix, g, RecoveryConfig(config.sparsity, tol * op.m))
    elif scheme == "reliable":
        ye = channel.equalize(y)
        first = const.decide(ye)
        sel = (ToneSelection.reliable(config.reliable_m) if config.reliable_m
               else ToneSelection.adaptive(config.radius, m_min=2 * config.sparsity))
        mask = reliable_mask(ye, first, sel)
        phi = dft_matrix(n)[None, :, :] * mask[:, :, None]
        g = np.where(mask, ye - first, 0.0)
        d_hat = omp_batch(phi, g, RecoveryConfig(config.sparsity), tolerances=tol * mask.sum(axis=1))
    tones = np.flatnonzero(data)
    res = cancel_and_decide(y, channel, d_hat, const, labels, tones)
    plain = res if scheme in ("unclipped", "none") else cancel_and_decide(
        y, channel, np.zeros_like(d_hat), const, labels, tones)
    return LinkStats(res.bit_errors, res.bits, plain.bit_errors,
                     float(np.sum(np.abs(d_hat - noise.d) ** 2)), float(np.sum(np.abs(noise.d) ** 2)),
                     frames)
