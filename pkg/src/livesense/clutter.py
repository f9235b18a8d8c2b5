"""Adaptive self-interference cancellation by background subtraction.

The static background (leakage plus stationary reflections) is estimated
in the CSI domain and subtracted from each synchronized frame. Subtraction
always uses the background as it was *before* the frame is ingested, so
``subtract`` never depends on call order with respect to the same frame's
``update``. A target with exactly zero Doppler is removed along with the
clutter; that is by design.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .config import SensingConfig
from .frames import CsiFrame


def _tree_sum(stack: np.ndarray) -> np.ndarray:
    """Pairwise (binary-tree) column sum of a (K, N) stack.

    For K a power of two and identical rows every add is an exact doubling,
    so the mean of K copies of a frame reproduces it bit-exactly.
    """
    arr = stack
    while arr.shape[0] > 1:
        if arr.shape[0] % 2:
            odd = arr[-1:]
            arr = arr[0:-1:2] + arr[1::2]
            arr = np.concatenate([arr, odd])
        else:
            arr = arr[0::2] + arr[1::2]
    return arr[0]


class BackgroundEstimator:
    """Sliding-mean, exponential (ema), or frozen-template background.

    sliding_mean: elementwise mean of the last K frames.
    ema: background <- (1 - alpha) * background + alpha * frame.
    template: sliding mean during warmup, frozen afterwards.
    """

    def __init__(self, config: SensingConfig):
        sic = config.sic
        self.kind = sic.kind
        self.window_k = sic.window_k
        self.alpha = sic.alpha
        self.n = config.n_subcarriers
        self.frames_seen = 0
        self._window: deque[np.ndarray] = deque(maxlen=self.window_k)
        self._ema: np.ndarray | None = None
        self._template: np.ndarray | None = None

    @property
    def warmed_up(self) -> bool:
        if self.kind == "ema":
            return self.frames_seen >= int(np.ceil(1.0 / self.alpha))
        return self.frames_seen >= self.window_k

    def background(self) -> np.ndarray:
        """Current background vector (zeros before any frame is ingested)."""
        if self.kind == "ema":
            if self._ema is None:
                return np.zeros(self.n, dtype=np.complex128)
            return self._ema
        if self.kind == "template" and self._template is not None:
            return self._template
        if not self._window:
            return np.zeros(self.n, dtype=np.complex128)
        return _tree_sum(np.asarray(self._window)) / len(self._window)

    def subtract(self, frame: CsiFrame) -> CsiFrame:
        """Remove the current background; does not modify estimator state."""
        if self.frames_seen == 0:
            return frame
        return frame.with_csi(frame.csi - self.background())

    def update(self, frame: CsiFrame) -> None:
        """Ingest a synchronized frame into the background estimate."""
        if frame.csi.shape[0] != self.n:
            raise ValueError("frame length does not match background")
        if self.kind == "ema":
            if self._ema is None:
                self._ema = frame.csi.copy()
            else:
                self._ema = (1.0 - self.alpha) * self._ema + self.alpha * frame.csi
        elif self.kind == "template" and self._template is not None:
            return  # frozen after warmup
        else:
            self._window.append(frame.csi)
            if self.kind == "template" and len(self._window) == self.window_k:
                self._template = _tree_sum(np.asarray(self._window)) / self.window_k
                self._window.clear()
        self.frames_seen += 1
