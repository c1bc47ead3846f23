"""ECG signal preprocessing: bandpass filtering, normalization, windowing."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import signal as sps

from .errors import GafnetError

DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Signal:
    """A 1-D sampled waveform with its sampling frequency in Hz."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", arr)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("signal must be a nonempty 1-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        if self.fs <= 0:
            raise ValueError("sampling frequency must be positive")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class FilterCoefficients:
    """Cascaded second-order sections of a bandpass filter.

    `sos` has shape (n_sections, 6): rows are (b0, b1, b2, 1, a1, a2).
    """

    sos: np.ndarray
    f_l: float
    f_h: float
    order: int

    def __post_init__(self):
        sos = np.asarray(self.sos, dtype=np.float64)
        object.__setattr__(self, "sos", sos)
        if sos.ndim != 2 or sos.shape[1] != 6:
            raise ValueError("sos must have shape (n_sections, 6)")
        for row in sos:
            poles = np.roots(row[3:])
            if np.any(np.abs(poles) >= 1.0):
                raise GafnetError("unstable filter design: pole on or outside unit circle")


@dataclass
class Segment:
    """A fixed-length window cut from a preprocessed signal."""

    values: np.ndarray
    source_index: int = 0
    label: Optional[int] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("segment contains non-finite values")

    def __len__(self):
        return self.values.size


@dataclass
class PreprocessConfig:
    """Preprocessing parameters.

    `window` of None means one window spanning the whole signal (the default
    for fixed-length UCR series, where each series carries a single label).
    """

    f_l: float = 0.5
    f_h: float = 40.0
    order: int = 4
    window: Optional[int] = None
    overlap: int = 0
    filter_mode: str = "single-pass"
    enable_filter: bool = False

    def __post_init__(self):
        if self.window is not None:
            if self.window < 2:
                raise ValueError("window must be >= 2")
            if not 0 <= self.overlap < self.window:
                raise ValueError("overlap must satisfy 0 <= o < w")
        if self.filter_mode not in ("single-pass", "forward-backward"):
            raise ValueError(f"unknown filter_mode {self.filter_mode!r}")


def design_butterworth(order: int, f_l: float, f_h: float, fs: float) -> FilterCoefficients:
    """Design a Butterworth bandpass filter as cascaded biquads.

    Bilinear transform with frequency pre-warping; `order` is the analog
    prototype order (the digital bandpass has twice as many poles).
    """
    if not 1 <= order <= 8:
        raise ValueError("order must be in [1, 8]")
    if not (0 < f_l < f_h < fs / 2):
        raise ValueError(f"cutoffs must satisfy 0 < f_l < f_h < fs/2, got {f_l}, {f_h} at fs={fs}")
    sos = sps.butter(order, [f_l, f_h], btype="bandpass", output="sos", fs=fs)
    return FilterCoefficients(sos=sos, f_l=f_l, f_h=f_h, order=order)


def apply_filter(coeffs: FilterCoefficients, sig: Signal, mode: str = "single-pass") -> Signal:
    """Run the biquad cascade over a signal.

    single-pass: causal filtering from zero initial state.
    forward-backward: filter, reverse, filter, reverse -- zero phase with the
    squared magnitude response. Output length equals input length either way.
    """
    x = sig.samples
    y = sps.sosfilt(coeffs.sos, x)
    if mode == "forward-backward":
        y = sps.sosfilt(coeffs.sos, y[::-1])[::-1]
    elif mode != "single-pass":
        raise ValueError(f"unknown filter mode {mode!r}")
    return Signal(samples=np.ascontiguousarray(y), fs=sig.fs)


def normalize(sig: Signal) -> Signal:
    """Map to zero mean and unit population standard deviation.

    A degenerate (constant) signal maps to all zeros instead of dividing by
    a vanishing std.
    """
    x = sig.samples
    if x.size < 2:
        raise ValueError("normalize requires at least 2 samples")
    centered = x - x.mean()
    std = np.sqrt(np.mean(centered**2))
    if std < DEGENERATE_STD:
        return Signal(samples=np.zeros_like(x), fs=sig.fs)
    return Signal(samples=centered / std, fs=sig.fs)


def segment(sig: Signal, window: int, overlap: int) -> List[Segment]:
    """Cut into fixed windows of size `window` with `overlap` shared samples.

    Window i (0-based) covers samples [i*(w-o), i*(w-o)+w); trailing samples
    that do not fill a window are dropped.
    """
    t = len(sig)
    if window > t:
        raise ValueError(f"window {window} longer than signal {t}")
    if not 0 <= overlap < window:
        raise ValueError("overlap must satisfy 0 <= o < w")
    step = window - overlap
    n = (t - window) // step + 1
    return [
        Segment(values=sig.samples[i * step : i * step + window].copy(), source_index=i)
        for i in range(n)
    ]


def preprocess(raw: Signal, cfg: PreprocessConfig) -> List[Segment]:
    """Filter (optional) -> normalize -> segment."""
    sig = raw
    if cfg.enable_filter:
        coeffs = design_butterworth(cfg.order, cfg.f_l, cfg.f_h, sig.fs)
        sig = apply_filter(coeffs, sig, cfg.filter_mode)
    sig = normalize(sig)
    w = cfg.window if cfg.window is not None else len(sig)
    return segment(sig, w, cfg.overlap)
