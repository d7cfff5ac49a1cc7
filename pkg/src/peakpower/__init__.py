"""Multicarrier peak-power laboratory.

OFDM signal model, peak and distortion metrics, selection and
derandomization based peak reduction, low-PAPR sequences and balancing
codes, and compressed-sensing clipping-noise cancellation.
"""

__version__ = "0.1.0"

from .ofdm import Constellation, analyze, synthesize  # noqa: E402
from .metrics import Ccdf, papr, papr_db  # noqa: E402

__all__ = ["Constellation", "analyze", "synthesize", "Ccdf", "papr", "papr_db", "__version__"]
