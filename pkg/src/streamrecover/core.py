"""Shared data model and conventions.

Images are float64 arrays of shape ``(H, W, C)`` with ``C`` in {1, 3} and
intensities in [0, 1].  Flow fields are float64 arrays of shape ``(H, W, 2)``
holding ``(u, v)``: ``u`` is the column displacement (+right) and ``v`` the row
displacement (+down).  A flow tagged ``a -> b`` sends pixel ``(x, y)`` of frame
``a`` to ``(x + u, y + v)`` in frame ``b``; pixel centres sit on integer
coordinates.  Validity masks are boolean ``(H, W)`` arrays, True = trustworthy.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes disagree or are degenerate."""


class ChannelKind(str, Enum):
    HIGH_RES = "high_res"
    LOW_RES = "low_res"
    LOST = "lost"


@dataclass(frozen=True)
class ChannelEvent:
    kind: ChannelKind
    scale: Optional[int] = None

    def __post_init__(self):
        if self.kind is ChannelKind.LOW_RES:
            if self.scale is None or int(self.scale) != self.scale or self.scale < 2:
                raise ValueError(f"low-res event needs an integer scale >= 2, got {self.scale!r}")
        elif self.scale is not None:
            raise ValueError(f"{self.kind.value} event carries no scale")

    @property
    def token(self):
        if self.kind is ChannelKind.HIGH_RES:
            return "H"
        if self.kind is ChannelKind.LOST:
            return "X"
        return f"L{self.scale}"

    def check_dims(self, height, width):
        """LR frames must stay at least 8 px on each side."""
        if self.kind is ChannelKind.LOW_RES:
            s = self.scale
            if -(-width // s) < 8 or -(-height // s) < 8:
                raise DimensionError(
                    f"scale {s} leaves a {-(-height // s)}x{-(-width // s)} LR frame for {height}x{width}; need >= 8x8")


HIGH_RES = ChannelEvent(ChannelKind.HIGH_RES)
LOST = ChannelEvent(ChannelKind.LOST)


def low_res(scale):
    return ChannelEvent(ChannelKind.LOW_RES, scale)


def as_image(data):
    """Coerce to a float64 ``(H, W, C)`` image; 2-D input gains a channel axis."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionError(f"image must be HxW, HxWx1 or HxWx3, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"image has a zero dimension: {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    return img


def as_flow(data):
    flow = np.asarray(data, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise DimensionError(f"flow must be HxWx2, got shape {flow.shape}")
    if flow.shape[0] < 1 or flow.shape[1] < 1:
        raise DimensionError(f"flow has a zero dimension: {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise ValueError("flow contains non-finite values")
    return flow


def same_hw(*arrays):
    hw = arrays[0].shape[:2]
    for a in arrays[1:]:
        if a.shape[:2] != hw:
            raise DimensionError(f"spatial size mismatch: {hw} vs {a.shape[:2]}")
    return hw


def make_flow_constant(height, width, du, dv):
    if height < 1 or width < 1:
        raise DimensionError(f"flow dimensions must be >= 1, got {height}x{width}")
    flow = np.empty((int(height), int(width), 2))
    flow[..., 0] = du
    flow[..., 1] = dv
    return flow


def epe(flow_a, flow_b, mask=None):
    """Mean end-point error between two flow fields, optionally over ``mask``."""
    a = as_flow(flow_a)
    b = as_flow(flow_b)
    if a.shape != b.shape:
        raise DimensionError(f"flow shapes differ: {a.shape} vs {b.shape}")
    err = np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != err.shape:
            raise DimensionError(f"mask shape {mask.shape} does not match flow {err.shape}")
        if not mask.any():
            return 0.0
        return float(err[mask].mean())
    return float(err.mean())


def interior_mask(height, width, margin):
    mask = np.zeros((height, width), dtype=bool)
    if 2 * margin < height and 2 * margin < width:
        mask[margin:height - margin, margin:width - margin] = True
    return mask


@dataclass(frozen=True)
class HistoryBuffer:
    """The three most recent HR frames ``(I_-2, I_-1, I_0)``, oldest first."""

    frames: Tuple[np.ndarray, np.ndarray, np.ndarray]
    indices: Tuple[int, int, int] = (0, 1, 2)

    def __post_init__(self):
        if len(self.frames) != 3 or len(self.indices) != 3:
            raise ValueError(f"history needs exactly 3 frames, got {len(self.frames)}")
        frames = tuple(as_image(f) for f in self.frames)
        if not (frames[0].shape == frames[1].shape == frames[2].shape):
            raise DimensionError("history frames differ in shape")
        idx = tuple(int(i) for i in self.indices)
        if not (idx[0] < idx[1] < idx[2]):
            raise ValueError(f"history frame numbers must increase strictly, got {idx}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_frames(cls, frames: Sequence[np.ndarray], indices=None):
        frames = tuple(frames)
        if indices is None:
            indices = tuple(range(len(frames)))
        return cls(frames, tuple(indices))

    @property
    def i0(self):
        return self.frames[2]

    @property
    def i_m1(self):
        return self.frames[1]

    @property
    def i_m2(self):
        return self.frames[0]

    @property
    def shape(self):
        return self.frames[2].shape
