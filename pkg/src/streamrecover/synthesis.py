"""End-to-end recovery of a lost frame (prediction) or a low-res frame (enhancement)."""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .core import DimensionError, HistoryBuffer, as_image
from .fusion import CandidateLabel, FlowCandidate, ProjectionConfig, fill_holes, fuse, project_flow
from .metrics import gaussian_blur
from .motion import BlockMatchConfig, BlockMatchEstimator, estimate_lossy, propagate, warp_predict
from .resample import BoundaryPolicy, backward_warp, degrade, upscale

GUIDED_MODES = ("blur", "consistent")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs for both pipelines.

    ``use_*`` switch individual flow candidates off for ablations; the
    estimated candidate only exists in the lossy case.  ``accel_threshold``
    (px) withdraws trust from the warped candidate wherever the history flows
    show an acceleration ``|F_{0->-2} - 2 F_{0->-1}|`` above it; ``None``
    disables the check.  ``guided_mode`` picks the low-band correction (see
    :func:`guided_residual`); ``fusion_window`` is the cost-averaging box of
    lossy-case fusion.
    """

    estimator: BlockMatchConfig = BlockMatchConfig()
    projection: ProjectionConfig = ProjectionConfig()
    guided_correction: bool = True
    blur_sigma: float = 2.0
    use_warped: bool = True
    use_propagated: bool = True
    use_estimated: bool = True
    policy: BoundaryPolicy = BoundaryPolicy.CLAMP
    accel_threshold: Optional[float] = 0.5
    guided_mode: str = "consistent"
    fusion_window: int = 5

    def __post_init__(self):
        if not self.blur_sigma > 0:
            raise ValueError(f"blur_sigma must be > 0, got {self.blur_sigma}")
        if self.accel_threshold is not None and not self.accel_threshold >= 0:
            raise ValueError(f"accel_threshold must be >= 0 or None, got {self.accel_threshold}")
        if self.fusion_window < 1 or self.fusion_window % 2 == 0:
            raise ValueError(f"fusion_window must be a positive odd integer, got {self.fusion_window}")
        if self.guided_mode not in GUIDED_MODES:
            raise ValueError(f"guided_mode must be one of {GUIDED_MODES}, got {self.guided_mode!r}")
        object.__setattr__(self, "policy", BoundaryPolicy(self.policy))

    def to_dict(self):
        return {
            "estimator": self.estimator.to_dict(),
            "projection": self.projection.to_dict(),
            "guided_correction": self.guided_correction,
            "blur_sigma": self.blur_sigma,
            "use_warped": self.use_warped,
            "use_propagated": self.use_propagated,
            "use_estimated": self.use_estimated,
            "policy": self.policy.value,
            "accel_threshold": self.accel_threshold,
            "guided_mode": self.guided_mode,
            "fusion_window": self.fusion_window,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "estimator" in d:
            d["estimator"] = BlockMatchConfig(**d["estimator"])
        if "projection" in d:
            d["projection"] = ProjectionConfig(**d["projection"])
        return cls(**d)


@dataclass
class RecoveryDiagnostics:
    """Every intermediate field of one recovery, keyed by name."""

    flows: Dict[str, np.ndarray] = field(default_factory=dict)
    masks: Dict[str, np.ndarray] = field(default_factory=dict)
    proxy: Optional[np.ndarray] = None
    fusion_reference: Optional[np.ndarray] = None
    warped_frame: Optional[np.ndarray] = None

    @property
    def fused(self):
        return self.flows["fused"]


def uniform_motion_mask(f_0_to_m1, f_0_to_m2, threshold):
    """True where the history is consistent with constant velocity.

    Under uniform acceleration ``F_{0->-2} - 2 F_{0->-1}`` equals the
    acceleration itself, so its magnitude flags pixels where linear
    extrapolation is wrong.
    """
    acc = f_0_to_m2 - 2.0 * f_0_to_m1
    return np.hypot(acc[..., 0], acc[..., 1]) <= threshold


def history_candidates(history, t, cfg=PipelineConfig(), estimator=None, diag=None):
    """Estimate the history flows and build the warped/propagated candidates for time ``t``."""
    estimator = estimator or BlockMatchEstimator(cfg.estimator)
    diag = diag if diag is not None else RecoveryDiagnostics()
    i_m2, i_m1, i0 = history.frames
    f_0_m1 = estimator.estimate(i0, i_m1)
    f_0_m2 = estimator.estimate(i0, i_m2)
    f_m1_0 = estimator.estimate(i_m1, i0)
    diag.flows.update(f_0_to_m1=f_0_m1, f_0_to_m2=f_0_m2, f_m1_to_0=f_m1_0)
    candidates = []
    if cfg.use_warped:
        warped, valid = warp_predict(f_m1_0, f_0_m1, t, cfg.policy)
        diag.flows["warped"] = warped
        diag.masks["warped_in_bounds"] = valid
        if cfg.use_propagated and cfg.accel_threshold is not None:
            uniform = uniform_motion_mask(f_0_m1, f_0_m2, cfg.accel_threshold)
            diag.masks["uniform_motion"] = uniform
            valid = valid & uniform
        diag.masks["warped"] = valid
        candidates.append(FlowCandidate(warped, valid, CandidateLabel.WARPED))
    if cfg.use_propagated:
        prop = propagate(f_0_m1, f_0_m2, t)
        diag.flows["propagated"] = prop
        candidates.append(FlowCandidate.always_valid(prop, CandidateLabel.PROPAGATED))
    return candidates, diag


def guided_residual(frame, proxy, s, cfg):
    """Low-band correction pulling ``frame`` toward the received LR evidence.

    ``blur`` mode returns ``G(proxy) - G(frame)``.  ``consistent`` mode first
    pushes ``frame`` through the same degrade/upscale chain as the proxy, so
    a frame that already explains the LR observation gets no correction.
    """
    if cfg.guided_mode == "consistent":
        h, w = frame.shape[:2]
        seen = upscale(degrade(np.clip(frame, 0.0, 1.0), s, cfg.policy), h, w, cfg.policy)
        return gaussian_blur(proxy - seen, cfg.blur_sigma)
    return gaussian_blur(proxy, cfg.blur_sigma) - gaussian_blur(frame, cfg.blur_sigma)


def _project_and_warp(i0, fused, cfg, diag):
    back, proj_valid = project_flow(fused, cfg.projection)
    filled = fill_holes(back, proj_valid)
    frame, warp_valid = backward_warp(i0, filled, cfg.policy)
    diag.flows.update(fused=fused, projected=back, filled=filled)
    diag.masks.update(projection=proj_valid, warp=warp_valid)
    return frame, proj_valid, warp_valid


def predict_lost(history: HistoryBuffer, t, cfg=PipelineConfig(), estimator=None):
    """Predict frame ``t`` from history alone; returns ``(image, diagnostics)``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    estimator = estimator or BlockMatchEstimator(cfg.estimator)
    candidates, diag = history_candidates(history, t, cfg, estimator)
    if not candidates:
        raise ValueError("lost-case prediction needs the warped or propagated candidate enabled")
    i0 = history.i0
    fused = fuse(candidates, i0)
    frame, _, warp_valid = _project_and_warp(i0, fused, cfg, diag)
    frame[~warp_valid] = i0[~warp_valid]
    diag.warped_frame = frame.copy()
    return np.clip(frame, 0.0, 1.0), diag


def enhance_lossy(history: HistoryBuffer, lr, s, t=1.0, cfg=PipelineConfig(), estimator=None):
    """Recover frame ``t`` from history plus its LR version at scale ``s``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    estimator = estimator or BlockMatchEstimator(cfg.estimator)
    i0 = history.i0
    low = as_image(lr)
    h, w = i0.shape[:2]
    if low.shape[:2] != (-(-h // s), -(-w // s)) or low.shape[2] != i0.shape[2]:
        raise DimensionError(f"LR frame {low.shape} inconsistent with scale {s} of {i0.shape}")
    candidates, diag = history_candidates(history, t, cfg, estimator)
    proxy = upscale(low, h, w, cfg.policy)
    diag.proxy = proxy
    if cfg.use_estimated:
        est = estimate_lossy(i0, low, s, estimator)
        diag.flows["estimated"] = est
        candidates.append(FlowCandidate.always_valid(est, CandidateLabel.ESTIMATED))
    if not candidates:
        raise ValueError("lossy-case enhancement needs at least one flow candidate enabled")
    # compare like with like: the reference goes through the same degrade/upscale chain as the proxy
    matched_ref = upscale(degrade(i0, s, cfg.policy), h, w, cfg.policy)
    diag.fusion_reference = matched_ref
    fused = fuse(candidates, matched_ref, proxy, cfg.policy, cfg.fusion_window)
    frame, proj_valid, warp_valid = _project_and_warp(i0, fused, cfg, diag)
    unknown = ~(proj_valid & warp_valid)
    frame[unknown] = proxy[unknown]
    diag.warped_frame = frame.copy()
    if cfg.guided_correction:
        frame = frame + guided_residual(frame, proxy, s, cfg)
    return np.clip(frame, 0.0, 1.0), diag
