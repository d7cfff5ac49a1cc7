"""Peak and distortion figures of merit, empirical CCDFs and LDP reference curves.

Signal metrics reduce over the last axis, so they accept a single time signal
or a stacked batch and return a scalar or an array accordingly. Power ratios
are linear; convert with :func:`to_db`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hpa import HpaModel, apply_hpa
from .ofdm import Constellation

# distortion below this fraction of the useful power is round-off, not distortion
_ZERO_DISTORTION = 1e-26


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def _power(signal):
    return np.abs(np.asarray(signal)) ** 2


def mean_power(signal):
    return np.mean(_power(signal), axis=-1)


def peak_power(signal):
    """max |s[k]|**2."""
    return np.max(_power(signal), axis=-1)


def _nonzero_mean_power(signal):
    p = mean_power(signal)
    if np.any(p == 0):
        raise ValueError("metric undefined for an all-zero signal")
    return p


def papr(signal):
    """Peak-to-average power ratio ``max|s|**2 / mean|s|**2`` (linear)."""
    p = _nonzero_mean_power(signal)
    return peak_power(signal) / p


def papr_db(signal):
    return to_db(papr(signal))


def cubic_metric_raw(signal):
    """Raw cubic metric ``mean|s|**6 / (mean|s|**2)**3``."""
    p = _nonzero_mean_power(signal)
    return np.mean(_power(signal) ** 3, axis=-1) / p ** 3


def cubic_metric_db(signal, offset_db: float, slope: float):
    """Cubic metric on a standards-body dB scale.

    ``offset_db`` is the raw metric of the reference signal in dB and ``slope``
    the empirical divisor; both must be supplied because they depend on the
    standard being modelled.
    """
    return (to_db(cubic_metric_raw(signal)) - offset_db) / slope


def aom(signal, hpa: HpaModel):
    """Amplifier oriented metric: mean squared gap between desired and actual output."""
    s = np.asarray(signal, dtype=complex)
    return np.mean(np.abs(s - apply_hpa(s, hpa)) ** 2, axis=-1)


def _sdr(useful, distorted):
    num = np.sum(distorted * np.conj(useful), axis=-1)
    den = np.sum(np.abs(useful) ** 2, axis=-1)
    if np.any(den == 0):
        raise ValueError("SDR undefined for an all-zero signal")
    alpha = num / den
    signal_power = np.abs(alpha) ** 2 * den
    residual = distorted - alpha[..., None] * useful
    dist_power = np.sum(np.abs(residual) ** 2, axis=-1)
    out = np.divide(signal_power, dist_power,
                    out=np.full(np.shape(den), np.inf),
                    where=dist_power > _ZERO_DISTORTION * signal_power)
    return out if np.ndim(out) else float(out)


def sdr(signal, hpa: HpaModel):
    """Signal-to-distortion ratio after removing the best linear gain.

    ``alpha = <g(s), s> / <s, s>``; the ratio is
    ``|alpha|**2 * mean|s|**2 / mean|g(s) - alpha*s|**2``. Returns ``inf`` when
    the amplifier acts as a pure gain on this signal.
    """
    s = np.asarray(signal, dtype=complex)
    return _sdr(s, apply_hpa(s, hpa))


def sdr_frequency(reference, received):
    """The same decomposition evaluated on subcarrier values."""
    return _sdr(np.asarray(reference, dtype=complex), np.asarray(received, dtype=complex))


def evm(reference, distorted):
    """RMS error vector magnitude relative to the RMS of ``reference``."""
    c = np.asarray(reference, dtype=complex)
    z = np.asarray(distorted, dtype=complex)
    if c.shape != z.shape:
        raise ValueError(f"frame shapes differ: {c.shape} vs {z.shape}")
    ref = np.mean(np.abs(c) ** 2, axis=-1)
    if np.any(ref == 0):
        raise ValueError("EVM undefined for an all-zero reference")
    return np.sqrt(np.mean(np.abs(z - c) ** 2, axis=-1) / ref)


def clipped_energy(signal, level: float):
    """Mean residual power above an amplitude level, ``mean((|s| - A)+**2)``."""
    excess = np.maximum(np.abs(np.asarray(signal)) - level, 0.0)
    return np.mean(excess ** 2, axis=-1)


def ser(sent, decided, constellation: Constellation) -> float:
    """Fraction of subcarriers whose hard decision differs from the sent symbol."""
    sent = np.asarray(sent)
    decided = np.asarray(decided)
    if sent.shape != decided.shape:
        raise ValueError(f"frame shapes differ: {sent.shape} vs {decided.shape}")
    wrong = constellation.nearest(sent) != constellation.nearest(decided)
    return float(np.mean(wrong))


@dataclass(frozen=True)
class ClipEvent:
    start: int
    duration: int


def clip_durations(signal, level: float) -> list[ClipEvent]:
    """Maximal runs of consecutive samples with ``|s| > level``.

    Runs are taken on the sample grid as given (no wrap-around at the frame
    boundary).
    """
    above = np.abs(np.asarray(signal).ravel()) > level
    if not above.any():
        return []
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [ClipEvent(int(a), int(b - a)) for a, b in zip(starts, stops)]


def clip_duration_samples(signals, level: float) -> np.ndarray:
    """Durations of every clip in a batch of signals (rows treated separately)."""
    above = np.abs(np.atleast_2d(np.asarray(signals))) > level
    pad = np.zeros((above.shape[0], 1), dtype=np.int8)
    edges = np.diff(np.hstack((pad, above.astype(np.int8), pad)), axis=1)
    starts = np.flatnonzero(edges.ravel() == 1)
    stops = np.flatnonzero(edges.ravel() == -1)
    return (stops - starts).astype(np.int64)


class Ccdf:
    """Empirical survival function ``F_c(x) = #{v > x} / n``."""

    def __init__(self, samples):
        values = np.sort(np.asarray(samples, dtype=float).ravel())
        if values.size == 0:
            raise ValueError("CCDF needs at least one sample")
        if np.isnan(values).any():
            raise ValueError("CCDF samples contain NaN")
        values.setflags(write=False)
        self._values = values

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def count(self) -> int:
        return self._values.size

    def __call__(self, x):
        return self.query(x)

    def query(self, x):
        below = np.searchsorted(self._values, x, side="right")
        out = (self.count - below) / self.count
        return out if np.ndim(out) else float(out)

    def quantile(self, p: float) -> float:
        """Smallest sample value ``x`` with ``F_c(x) <= p``."""
        if not 0 <= p < 1:
            raise ValueError("tail probability must lie in [0, 1)")
        # F_c(v_i) = (n - 1 - i)/n for distinct values; ties only lower it
        idx = int(np.ceil(self.count * (1.0 - p))) - 1
        return float(self._values[min(max(idx, 0), self.count - 1)])

    def curve(self, points: int | None = None):
        """``(x, F_c(x))`` pairs at the sample values (optionally thinned)."""
        x = np.unique(self._values)
        if points is not None and x.size > points:
            x = np.quantile(self._values, np.linspace(0.0, 1.0, points))
            x = np.unique(x)
        return x, self.query(x)


@dataclass(frozen=True)
class LdpModel:
    """Parameters of the large-deviation reference for N independent carriers."""

    n: int
    candidates: int = 1
    gamma: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("LDP model needs N >= 2")
        if self.candidates < 1:
            raise ValueError("candidate multiplicity must be >= 1")
        if not self.gamma > 0.25:
            raise ValueError("gamma must exceed 1/4")


def ldp_reference(model: LdpModel, x):
    """Natural log of the model CCDF, ``U * min(0, ln N - x)`` for linear PAPR ``x``."""
    out = model.candidates * np.minimum(0.0, np.log(model.n) - np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def ldp_knee_db(n: int) -> float:
    return float(to_db(np.log(n)))


def ldp_band(model: LdpModel) -> tuple[float, float]:
    """Concentration band of ``sqrt(PAPR)`` around ``sqrt(ln N)``.

    Returns the half-width ``gamma * ln ln N / sqrt(ln N)`` and the bound
    ``(ln N) ** -(2*gamma - 1/2)`` on the probability of leaving the band.
    """
    ln_n = np.log(model.n)
    half_width = model.gamma * np.log(ln_n) / np.sqrt(ln_n)
    bound = ln_n ** (-(2.0 * model.gamma - 0.5))
    return float(half_width), float(bound)


def ldp_band_violation(papr_values, model: LdpModel) -> float:
    """Empirical rate at which ``|sqrt(PAPR) - sqrt(ln N)|`` exceeds the band."""
    half_width, _ = ldp_band(model)
    dev = np.abs(np.sqrt(np.asarray(papr_values, dtype=float)) - np.sqrt(np.log(model.n)))
    return float(np.mean(dev > half_width))


METRICS = {
    "papr": papr,
    "peak": peak_power,
    "cm": cubic_metric_raw,
}


def resolve_metric(name: str, hpa: HpaModel | None = None, level: float | None = None):
    """Turn a CLI metric name into a callable on time signals."""
    key = name.lower()
    if key in METRICS:
        return METRICS[key]
    if key in ("aom", "sdr"):
        if hpa is None:
            raise ValueError(f"metric {name!r} needs an HPA model")
        if key == "aom":
            return lambda s: aom(s, hpa)
        # selection minimises, so rank by the inverse SDR
        return lambda s: 1.0 / sdr(s, hpa)
    if key in ("clipped", "clipped-energy"):
        if level is None:
            raise ValueError("clipped-energy metric needs a clip level")
        return lambda s: clipped_energy(s, level)
    raise ValueError(f"unknown metric {name!r}")
