"""CSI frame value type shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

FLAG_GAP_FILLED = 0x01
FLAG_LOW_CONFIDENCE = 0x02


@dataclass(frozen=True)
class CsiFrame:
    """One Wi-Fi frame's channel state: N complex gains, one per subcarrier.

    Subcarrier k maps to baseband frequency (k - N/2) * df. Instances are
    immutable; stages return new frames instead of mutating.
    """

    timestamp: float
    seq: int
    csi: np.ndarray
    flags: int = 0

    def __post_init__(self) -> None:
        csi = np.ascontiguousarray(self.csi, dtype=np.complex128)
        csi.setflags(write=False)
        object.__setattr__(self, "csi", csi)

    @property
    def n_subcarriers(self) -> int:
        return self.csi.shape[0]

    @property
    def gap_filled(self) -> bool:
        return bool(self.flags & FLAG_GAP_FILLED)

    @property
    def low_confidence(self) -> bool:
        return bool(self.flags & FLAG_LOW_CONFIDENCE)

    def with_csi(self, csi: np.ndarray) -> "CsiFrame":
        return replace(self, csi=csi)

    def with_flags(self, extra_flags: int) -> "CsiFrame":
        return replace(self, flags=self.flags | extra_flags)
