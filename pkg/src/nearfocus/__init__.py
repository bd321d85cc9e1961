"""Near-field beam focusing with fully-digital, hybrid and DMA transmit arrays."""

__version__ = "0.1.0"

from . import channel, dma, errors, hybrid, numerics, wmmse  # noqa: E402
from .channel import ArrayGeometry, DmaParams, NearFieldChannel, build_channel  # noqa: E402
from .dma import solve_dma  # noqa: E402
from .hybrid import solve_hybrid  # noqa: E402
from .wmmse import rate_per_user, solve_fully_digital, sum_rate  # noqa: E402

__all__ = [
    "channel", "dma", "errors", "hybrid", "numerics", "wmmse", "ArrayGeometry", "DmaParams",
    "NearFieldChannel", "build_channel", "solve_dma", "solve_hybrid", "rate_per_user",
    "solve_fully_digital", "sum_rate",
]
