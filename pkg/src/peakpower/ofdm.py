"""OFDM frames, constellations and the oversampled synthesis/analysis pair.

Frames are plain complex arrays whose last axis runs over the N subcarriers;
time signals are complex arrays whose last axis runs over the I*N samples of
the oversampled grid. Every function broadcasts over leading axes, so a batch
of Monte-Carlo frames is just a 2-D array.

Scaling convention::

    s[k] = N**-0.5 * sum_n C[n] * exp(2j*pi*k*n / (I*N)),   k = 0 .. I*N-1

Carriers sit in DFT bins 0..N-1 (no spectral centering) and unit-energy
symbols give unit mean sample power for every I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _gray(n: int) -> np.ndarray:
    i = np.arange(n)
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """A unit-energy signal constellation with a Gray bit labelling.

    ``points[v]`` is the symbol transmitted for the integer label ``v`` whose
    binary expansion (MSB first) is the bit group.
    """

    kind: str
    points: np.ndarray = field(repr=False)
    bits_per_symbol: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        m = pts.size
        if m < 2 or m & (m - 1):
            raise ValueError(f"constellation size must be a power of two, got {m}")
        if len(np.unique(np.round(pts, 12))) != m:
            raise ValueError("constellation points must be distinct")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation must have unit average energy")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @classmethod
    def bpsk(cls) -> "Constellation":
        return cls("BPSK", np.array([1.0, -1.0], dtype=complex), 1)

    @classmethod
    def qpsk(cls) -> "Constellation":
        # bit 0 -> sign of I, bit 1 -> sign of Q
        pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
        return cls("QPSK", pts, 2)

    @classmethod
    def qam(cls, m: int) -> "Constellation":
        """Square M-QAM, Gray coded independently on each rail."""
        side = int(round(np.sqrt(m)))
        if side * side != m or side < 2 or side & (side - 1):
            raise ValueError(f"square QAM needs M = 4**k, got {m}")
        k = int(np.log2(side))
        levels = 2 * np.arange(side) - (side - 1)
        # level index carrying Gray label g on one rail
        rail = np.empty(side)
        rail[_gray(side)] = levels
        labels = np.arange(m)
        pts = rail[labels >> k] + 1j * rail[labels & (side - 1)]
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
        return cls(f"QAM{m}", pts, 2 * k)

    @classmethod
    def psk(cls, m: int) -> "Constellation":
        if m < 2 or m & (m - 1):
            raise ValueError(f"PSK order must be a power of two, got {m}")
        pts = np.empty(m, dtype=complex)
        pts[_gray(m)] = np.exp(2j * np.pi * np.arange(m) / m)
        return cls(f"PSK{m}", pts, int(np.log2(m)))

    @classmethod
    def from_name(cls, name: str) -> "Constellation":
        key = name.strip().upper().replace("-", "")
        if key == "BPSK":
            return cls.bpsk()
        if key == "QPSK":
            return cls.qpsk()
        if key.startswith("QAM"):
            return cls.qam(int(key[3:]))
        if key.endswith("QAM"):
            return cls.qam(int(key[:-3]))
        if key.startswith("PSK"):
            return cls.psk(int(key[3:]))
        if key.endswith("PSK") and key[:-3].isdigit():
            return cls.psk(int(key[:-3]))
        raise ValueError(f"unknown constellation {name!r}")

    def labels_to_bits(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        bits = (labels[..., None] >> shifts) & 1
        return bits.reshape(labels.shape[:-1] + (-1,)).astype(np.uint8)

    def bits_to_labels(self, bits: np.ndarray, n: int) -> np.ndarray:
        bits = np.asarray(bits).astype(np.int64)
        if bits.shape[-1] != n * self.bits_per_symbol:
            raise ValueError(
                f"expected {n * self.bits_per_symbol} bits for N={n} "
                f"{self.kind} symbols, got {bits.shape[-1]}"
            )
        groups = bits.reshape(bits.shape[:-1] + (n, self.bits_per_symbol))
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return groups @ weights

    def nearest(self, symbols: np.ndarray) -> np.ndarray:
        """Label of the nearest constellation point for every symbol."""
        symbols = np.asarray(symbols)
        d = np.abs(symbols[..., None] - self.points)
        return np.argmin(d, axis=-1)

    def decide(self, symbols: np.ndarray) -> np.ndarray:
        return self.points[self.nearest(symbols)]


def modulate(bits, constellation: Constellation, n: int) -> np.ndarray:
    """Map a bit vector (or batch of them) onto an N-carrier frame."""
    labels = constellation.bits_to_labels(bits, n)
    return constellation.points[labels]


def demodulate(symbols, constellation: Constellation) -> np.ndarray:
    """Hard nearest-point decisions back to bits."""
    return constellation.labels_to_bits(constellation.nearest(symbols))


def random_frames(rng: np.random.Generator, constellation: Constellation, n: int,
                  shape: tuple[int, ...] = ()) -> np.ndarray:
    labels = rng.integers(0, constellation.size, size=shape + (n,))
    return constellation.points[labels]


def synthesize(frame, oversample: int = 1) -> np.ndarray:
    """Oversampled IDFT: N carriers -> I*N time samples (see module docstring)."""
    if int(oversample) != oversample or oversample < 1:
        raise ValueError(f"oversampling factor must be an integer >= 1, got {oversample}")
    oversample = int(oversample)
    frame = np.asarray(frame, dtype=complex)
    n = frame.shape[-1]
    if n < 1:
        raise ValueError("frame needs at least one subcarrier")
    total = oversample * n
    return np.fft.ifft(frame, n=total, axis=-1) * (total / np.sqrt(n))


def analyze(signal, oversample: int = 1) -> np.ndarray:
    """Left inverse of :func:`synthesize`.

    Returns the content of DFT bins 0..N-1. For band-limited input (anything
    produced by ``synthesize``) this recovers the frame exactly; for clipped
    signals it discards the out-of-band part, which is what a receiver sees.
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError(f"oversampling factor must be an integer >= 1, got {oversample}")
    oversample = int(oversample)
    signal = np.asarray(signal, dtype=complex)
    total = signal.shape[-1]
    if total % oversample:
        raise ValueError(f"signal length {total} is not divisible by I={oversample}")
    n = total // oversample
    spectrum = np.fft.fft(signal, axis=-1)[..., :n]
    return spectrum * (np.sqrt(n) / total)


def oversampling_overshoot_bound(oversample: int) -> float:
    """Worst-case ratio of the continuous-time peak to the I-grid peak (amplitude)."""
    return 1.0 / np.cos(np.pi / (2 * oversample))


def write_frame_csv(path, values) -> None:
    """Write a frame or time signal as ``index,re,im`` rows."""
    values = np.asarray(values, dtype=complex).ravel()
    with open(path, "w", newline="\n") as fh:
        fh.write("index,re,im\n")
        for i, v in enumerate(values):
            fh.write(f"{i},{float(v.real)!r},{float(v.imag)!r}\n")


def read_frame_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 1] + 1j * data[order, 2]
