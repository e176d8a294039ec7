"""Synthetic scenes with analytic flow, channel replay and the experiment sweeps."""
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .core import ChannelKind, HistoryBuffer, epe, interior_mask, make_flow_constant
from .fusion import fuse
from .io import ChannelTrace, FrameRecord, RecoveryReport, parse_trace, read_ppm
from .metrics import charbonnier, psnr, ssim
from .motion import BlockMatchEstimator, estimate_lossy
from .resample import bicubic_kernel, degrade, upscale
from .synthesis import PipelineConfig, enhance_lossy, history_candidates, predict_lost

# (lattice cell in px, amplitude) per value-noise octave
OCTAVES = ((16.0, 0.40), (8.0, 0.30), (4.0, 0.25), (2.0, 0.20))
BORDER_CLEARANCE = 8


class SceneError(ValueError):
    pass


class SceneKind(str, Enum):
    TRANSLATE = "translate"
    PROJECTILE = "projectile"
    STATIC = "static"


@dataclass(frozen=True)
class SceneSpec:
    """A textured plane moving rigidly across the frame.

    Frame ``i`` shows the texture shifted by ``velocity * i + 0.5 *
    acceleration * i**2`` (acceleration only for projectile scenes), so every
    ground-truth flow is spatially constant and known in closed form.
    """

    kind: SceneKind = SceneKind.TRANSLATE
    size: Tuple[int, int] = (64, 64)
    texture_seed: int = 0
    velocity: Tuple[float, float] = (0.0, 0.0)
    acceleration: Tuple[float, float] = (0.0, 0.0)
    frames: int = 4
    channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", SceneKind(self.kind))
        object.__setattr__(self, "size", tuple(int(v) for v in self.size))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        object.__setattr__(self, "acceleration", tuple(float(v) for v in self.acceleration))
        if len(self.size) != 2 or min(self.size) < 2 * BORDER_CLEARANCE:
            raise SceneError(f"size must be (H, W) with both >= {2 * BORDER_CLEARANCE}, got {self.size}")
        if self.frames < 4:
            raise SceneError(f"a scene needs >= 4 frames (3 bootstrap + 1 evaluated), got {self.frames}")
        if self.channels not in (1, 3):
            raise SceneError(f"channels must be 1 or 3, got {self.channels}")
        if self.kind is not SceneKind.PROJECTILE and any(self.acceleration):
            raise SceneError(f"{self.kind.value} scenes take no acceleration")
        if self.kind is SceneKind.STATIC and any(self.velocity):
            raise SceneError("static scenes take no velocity")
        off = self.offsets()
        h, w = self.size
        for axis, dim in ((0, w), (1, h)):
            limit = dim / 2.0 - BORDER_CLEARANCE
            if np.abs(off[:, axis]).max() > limit:
                raise SceneError(
                    f"motion moves content {np.abs(off[:, axis]).max():.2f} px along "
                    f"{'xy'[axis]}; at most {limit:.2f} keeps the frame centre {BORDER_CLEARANCE} px inside")

    def offsets(self):
        """Texture displacement ``(ox, oy)`` of every frame."""
        i = np.arange(self.frames, dtype=np.float64)[:, None]
        v = np.array(self.velocity)[None, :]
        a = np.array(self.acceleration)[None, :]
        if self.kind is SceneKind.STATIC:
            return np.zeros((self.frames, 2))
        if self.kind is SceneKind.TRANSLATE:
            return v * i
        return v * i + 0.5 * a * i * i

    def flow_between(self, i, j):
        """Analytic ``F_{i->j}`` (constant field)."""
        off = self.offsets()
        d = off[j] - off[i]
        return make_flow_constant(self.size[0], self.size[1], d[0], d[1])

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "size": list(self.size),
            "texture_seed": self.texture_seed,
            "velocity": list(self.velocity),
            "acceleration": list(self.acceleration),
            "frames": self.frames,
            "channels": self.channels,
        }

    @classmethod
    def from_dict(cls, d):
        known = {"kind", "size", "texture_seed", "velocity", "acceleration", "frames", "channels"}
        extra = set(d) - known
        if extra:
            raise SceneError(f"unknown scene fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _lattice_weights(coords, origin, cell, n):
    """Bicubic interpolation matrix from lattice samples to ``coords``."""
    g = (coords - origin) / cell
    base = np.floor(g).astype(np.int64)
    mat = np.zeros((len(coords), n))
    rows = np.arange(len(coords))
    for k in range(-1, 3):
        idx = base + k
        mat[rows, idx] += bicubic_kernel(g - idx)
    return mat


def _render(spec, offsets):
    h, w = spec.size
    rng = np.random.default_rng(spec.texture_seed)
    xmin = -offsets[:, 0].max()
    xmax = w - 1 - offsets[:, 0].min()
    ymin = -offsets[:, 1].max()
    ymax = h - 1 - offsets[:, 1].min()
    frames = [np.full((h, w, spec.channels), 0.5) for _ in offsets]
    cols = np.arange(w, dtype=np.float64)
    rows = np.arange(h, dtype=np.float64)
    for cell, amp in OCTAVES:
        ox0 = (np.floor(xmin / cell) - 2) * cell
        oy0 = (np.floor(ymin / cell) - 2) * cell
        nx = int(np.ceil((xmax - ox0) / cell)) + 3
        ny = int(np.ceil((ymax - oy0) / cell)) + 3
        lattice = rng.random((ny, nx, spec.channels)) - 0.5
        for frame, (ox, oy) in zip(frames, offsets):
            wx = _lattice_weights(cols - ox, ox0, cell, nx)
            wy = _lattice_weights(rows - oy, oy0, cell, ny)
            for c in range(spec.channels):
                frame[:, :, c] += amp * (wy @ lattice[:, :, c] @ wx.T)
    return [np.clip(f, 0.0, 1.0) for f in frames]


def generate_scene(spec):
    """Render ``spec``; returns ``(frames, gt_flows)`` with ``gt_flows[i] = F_{i->i+1}``."""
    frames = _render(spec, spec.offsets())
    flows = [spec.flow_between(i, i + 1) for i in range(spec.frames - 1)]
    return frames, flows


def load_frame_directory(path):
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in (".ppm", ".pgm"))
    if len(files) < 4:
        raise SceneError(f"{path}: need >= 4 .ppm/.pgm frames, found {len(files)}")
    frames = [read_ppm(p) for p in files]
    if any(f.shape != frames[0].shape for f in frames):
        raise SceneError(f"{path}: frames differ in size")
    return frames


class HistoryMode(str, Enum):
    RECOVERED = "recovered"
    ORACLE = "oracle"


@dataclass(frozen=True)
class RunConfig:
    scene: Union[SceneSpec, str]
    trace: ChannelTrace
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    gap: int = 1
    history_mode: HistoryMode = HistoryMode.RECOVERED
    seed: Optional[int] = None

    def __post_init__(self):
        if self.gap < 1:
            raise ValueError(f"gap must be >= 1, got {self.gap}")
        object.__setattr__(self, "history_mode", HistoryMode(self.history_mode))
        if isinstance(self.trace, str):
            object.__setattr__(self, "trace", parse_trace(self.trace))

    def scene_spec(self):
        """The effective scene (``seed`` overrides the texture seed), or None for a directory."""
        if not isinstance(self.scene, SceneSpec):
            return None
        if self.seed is None:
            return self.scene
        d = self.scene.to_dict()
        d["texture_seed"] = self.seed
        return SceneSpec.from_dict(d)

    def load(self):
        spec = self.scene_spec()
        if spec is None:
            return load_frame_directory(self.scene), None
        frames, _ = generate_scene(spec)
        return frames, spec

    def to_dict(self):
        spec = self.scene_spec()
        return {
            "scene": spec.to_dict() if spec is not None else {"directory": str(self.scene)},
            "trace": self.trace.to_text(),
            "pipeline": self.pipeline.to_dict(),
            "gap": self.gap,
            "history_mode": self.history_mode.value,
            "seed": self.seed,
        }


def _history(store, end):
    return HistoryBuffer(tuple(store[i] for i in (end - 2, end - 1, end)), (end - 2, end - 1, end))


def _recover(event, history, lr, t, cfg, estimator):
    """Run the pipeline for one event; sees only history and the received LR frame."""
    if event.kind is ChannelKind.LOST:
        return predict_lost(history, t, cfg, estimator)
    return enhance_lossy(history, lr, event.scale, t, cfg, estimator)


def run_simulation(cfg: RunConfig):
    """Replay the channel trace over the scene and score every non-bootstrap frame.

    Frame ``k`` is recovered from the three consecutive frames ending at
    ``max(2, k - gap)``; in ``recovered`` mode earlier reconstructions stand in
    for the frames they replaced.
    """
    frames, spec = cfg.load()
    if len(cfg.trace) != len(frames):
        raise ValueError(f"trace has {len(cfg.trace)} events but the scene has {len(frames)} frames")
    h, w = frames[0].shape[:2]
    estimator = BlockMatchEstimator(cfg.pipeline.estimator)
    store = {i: frames[i] for i in range(3)}
    records = []
    for k in range(3, len(frames)):
        event = cfg.trace[k]
        event.check_dims(h, w)
        end = max(2, k - cfg.gap)
        t = float(k - end)
        if event.kind is ChannelKind.HIGH_RES:
            recovered = frames[k]
            fused = None
            provenance = "received"
            refs = ()
        else:
            lr = degrade(frames[k], event.scale) if event.kind is ChannelKind.LOW_RES else None
            history = _history(store, end)
            recovered, diag = _recover(event, history, lr, t, cfg.pipeline, estimator)
            fused = diag.fused
            provenance = "predicted" if event.kind is ChannelKind.LOST else "enhanced"
            refs = history.indices
        # metrics only below this line: the ground truth of frame k is not an input above
        truth = frames[k]
        flow_err = None
        if fused is not None and spec is not None:
            flow_err = epe(fused, spec.flow_between(end, k))
        records.append(FrameRecord(
            frame_index=k,
            channel_kind=event.kind.value,
            scale=event.scale,
            psnr=psnr(recovered, truth),
            ssim=ssim(recovered, truth),
            charbonnier=charbonnier(recovered, truth),
            epe=flow_err,
            provenance=provenance,
            references=refs,
        ))
        store[k] = recovered if cfg.history_mode is HistoryMode.RECOVERED else frames[k]
    return RecoveryReport(records, cfg.to_dict())


def _need_ground_truth(cfg):
    frames, spec = cfg.load()
    if spec is None:
        raise SceneError("sweeps need a synthetic scene with analytic flow")
    return frames, spec


def sweep_scale(cfg: RunConfig, scales, margin=BORDER_CLEARANCE):
    """Flow accuracy versus LR scale: estimated flow against the history-only predictions.

    History is frames 0-2, the target is frame ``2 + gap``.  EPEs are measured
    on pixels at least ``margin`` px from the border.
    """
    scales = [int(s) for s in scales]
    if any(s < 2 for s in scales) or scales != sorted(scales):
        raise ValueError(f"scales must be ascending and >= 2, got {scales}")
    frames, spec = _need_ground_truth(cfg)
    target = 2 + cfg.gap
    if target >= len(frames):
        raise ValueError(f"gap {cfg.gap} needs frame {target} but the scene has {len(frames)}")
    h, w = frames[0].shape[:2]
    t = float(cfg.gap)
    estimator = BlockMatchEstimator(cfg.pipeline.estimator)
    history = HistoryBuffer(tuple(frames[:3]), (0, 1, 2))
    i0 = history.i0
    candidates, diag = history_candidates(history, t, cfg.pipeline, estimator)
    predicted = fuse(candidates, i0)
    truth = spec.flow_between(2, target)
    mask = interior_mask(h, w, margin)
    pred_errs = {
        "epe_warped": epe(diag.flows["warped"], truth, mask),
        "epe_propagated": epe(diag.flows["propagated"], truth, mask),
        "epe_predicted": epe(predicted, truth, mask),
    }
    rows = []
    for s in scales:
        lr = degrade(frames[target], s)
        est = estimate_lossy(i0, lr, s, estimator)
        rows.append({"scale": s, "epe_estimated": epe(est, truth, mask), **pred_errs})
    return rows


def sweep_gap(cfg: RunConfig, gaps, scale=4):
    """Recovery PSNR when the current frame is ``gap`` frames past the history (frames 0-2)."""
    gaps = [int(g) for g in gaps]
    if any(g < 1 for g in gaps):
        raise ValueError(f"gaps must be >= 1, got {gaps}")
    frames, spec = cfg.load()
    h, w = frames[0].shape[:2]
    estimator = BlockMatchEstimator(cfg.pipeline.estimator)
    history = HistoryBuffer(tuple(frames[:3]), (0, 1, 2))
    rows = []
    for g in gaps:
        target = 2 + g
        if target >= len(frames):
            raise ValueError(f"gap {g} needs frame {target} but the scene has {len(frames)}")
        truth = frames[target]
        lr = degrade(truth, scale)
        lossy, _ = enhance_lossy(history, lr, scale, float(g), cfg.pipeline, estimator)
        lost, _ = predict_lost(history, float(g), cfg.pipeline, estimator)
        rows.append({
            "gap": g,
            "scale": scale,
            "psnr_lossy": psnr(lossy, truth),
            "psnr_lost": psnr(lost, truth),
            "psnr_bicubic": psnr(upscale(lr, h, w), truth),
        })
    return rows
