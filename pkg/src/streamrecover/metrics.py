"""Image quality metrics on [0, 1] intensities."""
import numpy as np
from scipy import ndimage

from .core import DimensionError, as_image
from .motion import to_gray

PSNR_CAP = 99.0
CHARBONNIER_EPS = 1e-6
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11x11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """Channel-averaged PSNR in dB; exact matches report ``PSNR_CAP``."""
    a, b = _pair(a, b)
    mse = ((a - b) ** 2).reshape(-1, a.shape[2]).mean(axis=0)
    with np.errstate(divide="ignore"):
        per_channel = np.where(mse > 0, 10.0 * np.log10(1.0 / np.where(mse > 0, mse, 1.0)), PSNR_CAP)
    return float(min(np.minimum(per_channel, PSNR_CAP).mean(), PSNR_CAP))


def _gaussian_window():
    x = np.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return g / g.sum()


def _local_mean(img, g):
    out = ndimage.correlate1d(img, g, axis=0, mode="reflect")
    return ndimage.correlate1d(out, g, axis=1, mode="reflect")


def ssim(a, b):
    """Gaussian-window SSIM on luma, averaged over pixels at least 5 px from the border."""
    a, b = _pair(a, b)
    x = to_gray(a)
    y = to_gray(b)
    g = _gaussian_window()
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mx = _local_mean(x, g)
    my = _local_mean(y, g)
    vx = _local_mean(x * x, g) - mx * mx
    vy = _local_mean(y * y, g) - my * my
    cxy = _local_mean(x * y, g) - mx * my
    smap = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    p = SSIM_RADIUS
    if smap.shape[0] > 2 * p and smap.shape[1] > 2 * p:
        smap = smap[p:-p, p:-p]
    return float(smap.mean())


def charbonnier(a, b, eps=CHARBONNIER_EPS):
    a, b = _pair(a, b)
    d = a - b
    return float(np.sqrt(d * d + eps * eps).mean())


def gaussian_blur(image, sigma):
    img = as_image(image)
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest")
