"""Memoryless amplifier models acting on the envelope of a complex signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 1-dB compression point of the default cubic model, dB above RMS
CUBIC_P1DB_DB = 6.0


def clip_amplitude(clip_db: float, rms: float = 1.0) -> float:
    """Amplitude level that sits ``clip_db`` dB (power) above ``rms``."""
    return float(rms * 10.0 ** (clip_db / 20.0))


def default_cubic_coefficient(p1db_db: float = CUBIC_P1DB_DB) -> float:
    r2 = 10.0 ** (p1db_db / 10.0)
    return (1.0 - 10.0 ** (-1.0 / 20.0)) / r2


@dataclass(frozen=True)
class HpaModel:
    """Point-symmetric AM/AM nonlinearity ``g`` with ``|g(x)| <= |x|``.

    kind is one of ``identity``, ``soft`` (soft limiter at amplitude ``level``),
    ``rapp`` (smoothness ``p``, saturation ``level``) or ``cubic``
    (``r - c3*r**3`` up to its maximum, flat beyond).
    """

    kind: str = "identity"
    level: float = np.inf
    p: float = 2.0
    c3: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "soft", "rapp", "cubic"):
            raise ValueError(f"unknown HPA kind {self.kind!r}")
        if self.kind in ("soft", "rapp") and not self.level >= 0:
            raise ValueError("HPA level must be non-negative")
        if self.kind == "rapp" and not self.p > 0:
            raise ValueError("Rapp smoothness must be positive")
        if self.kind == "cubic" and not self.c3 >= 0:
            raise ValueError("cubic coefficient must be non-negative (compressive)")

    @classmethod
    def identity(cls) -> "HpaModel":
        return cls("identity")

    @classmethod
    def soft_limiter(cls, level: float) -> "HpaModel":
        return cls("soft", level=float(level))

    @classmethod
    def rapp(cls, p: float, level: float) -> "HpaModel":
        return cls("rapp", level=float(level), p=float(p))

    @classmethod
    def cubic(cls, c3: float | None = None) -> "HpaModel":
        return cls("cubic", c3=default_cubic_coefficient() if c3 is None else float(c3))

    @classmethod
    def parse(cls, text: str) -> "HpaModel":
        """Parse ``identity``, ``soft:A``, ``rapp:p:A`` or ``cubic[:c3]``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] in ("identity", "none", "linear"):
                return cls.identity()
            if parts[0] in ("soft", "clip", "soft-limiter"):
                return cls.soft_limiter(float(parts[1]))
            if parts[0] == "rapp":
                return cls.rapp(float(parts[1]), float(parts[2]))
            if parts[0] == "cubic":
                return cls.cubic(float(parts[1]) if len(parts) > 1 else None)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"bad HPA description {text!r}") from exc
        raise ValueError(f"unknown HPA kind in {text!r}")

    def amplitude(self, r: np.ndarray) -> np.ndarray:
        """Output envelope for input envelope ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "identity":
            return r.copy()
        if self.kind == "soft":
            return np.minimum(r, self.level)
        if self.kind == "rapp":
            if self.level == 0:
                return np.zeros_like(r)
            q = 2.0 * self.p
            with np.errstate(over="ignore"):
                ratio = (r / self.level) ** q
            out = r / (1.0 + ratio) ** (1.0 / q)
            # (r/A)**2p overflows for large p; the limit is the soft limiter
            return np.where(np.isfinite(ratio), out, self.level)
        if self.c3 == 0:
            return r.copy()
        r_top = 1.0 / np.sqrt(3.0 * self.c3)
        rc = np.minimum(r, r_top)
        return rc - self.c3 * rc ** 3

    def __call__(self, signal) -> np.ndarray:
        return apply_hpa(signal, self)


def apply_hpa(signal, model: HpaModel) -> np.ndarray:
    """Apply the envelope nonlinearity sample by sample, keeping the phase."""
    x = np.asarray(signal, dtype=complex)
    if model.kind == "identity":
        return x.copy()
    r = np.abs(x)
    gr = model.amplitude(r)
    scale = np.divide(gr, r, out=np.zeros_like(r), where=r > 0)
    return x * scale
