"""The eight observational disturbance families and their parameter grids.

All functions act on an (H, W, 3) uint8 frame only; none touch simulator
state.  Float results are quantised with floor(x + 0.5) and clipped to
[0, 255].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mfbench.disturbance.rng import SplitMix64
from mfbench.errors import ConfigError, DimensionError

FAMILIES = (
    "blurring", "jittering", "frame_dropping", "full_occlusion",
    "overexposing", "partial_occlusion", "gaussian_noise", "impulse_noise",
)
CATEGORY = {
    "blurring": "global", "jittering": "global", "frame_dropping": "global",
    "full_occlusion": "global", "overexposing": "local", "partial_occlusion": "local",
    "gaussian_noise": "discrete", "impulse_noise": "discrete",
}
# disturbed:clean ratios each family is evaluated at
SUPPORTED_RATIOS = {
    "blurring": ((1, 0), (1, 1), (1, 3)),
    "jittering": ((1, 0), (1, 1), (1, 3)),
    "frame_dropping": ((1, 1), (1, 3), (1, 5)),
    "full_occlusion": ((1, 1), (1, 3), (1, 5)),
    "overexposing": ((1, 1), (1, 3), (1, 5)),
    "partial_occlusion": ((1, 1), (1, 3), (1, 5)),
    "gaussian_noise": ((1, 0), (1, 1), (1, 3)),
    "impulse_noise": ((1, 0), (1, 1), (1, 3)),
}

BLUR_SIZES = ((11, 11), (15, 15), (29, 29))
BLUR_SIGMAS = ((5, 0), (0, 5))
JITTER_DIRECTIONS = ("H", "V", "D")
JITTER_SIZES = (15, 25, 50)
OVEREXPOSE_INTENSITIES = (0.7, 0.85, 1.0)
OCCLUSION_CENTERS = (0.25, 0.5, 0.75)
NOISE_STDS = (25, 50, 75)
IMPULSE_AMOUNTS = (0.2, 0.5, 0.8)
IMPULSE_SALT = (0.0, 0.5, 1.0)


@dataclass(frozen=True)
class DisturbanceSpec:
    family: str
    params: dict = field(default_factory=dict)

    @property
    def category(self) -> str:
        return CATEGORY[self.family]

    def to_dict(self) -> dict:
        return {"family": self.family, "category": self.category,
                "params": {k: list(v) if isinstance(v, tuple) else v
                           for k, v in self.params.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> DisturbanceSpec:
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in d["params"].items()}
        return cls(d["family"], params)


@dataclass
class DisturbanceContext:
    """Per-trial state: the most recent frame shown undisturbed."""

    last_clean: np.ndarray | None = None


def sample_params(family: str, rng: SplitMix64) -> DisturbanceSpec:
    """Uniform draw from the family's grid; axes drawn in the listed order."""
    if family == "blurring":
        p = {"ksize": rng.choice(BLUR_SIZES), "sigma": rng.choice(BLUR_SIGMAS)}
    elif family == "jittering":
        p = {"direction": rng.choice(JITTER_DIRECTIONS), "size": rng.choice(JITTER_SIZES)}
    elif family in ("frame_dropping", "full_occlusion"):
        p = {}
    elif family == "overexposing":
        # centre uniform over the middle half of the frame, as fractions
        p = {"intensity": rng.choice(OVEREXPOSE_INTENSITIES),
             "center": (0.25 + 0.5 * rng.uniform(), 0.25 + 0.5 * rng.uniform())}
    elif family == "partial_occlusion":
        p = {"center_x": rng.choice(OCCLUSION_CENTERS)}
    elif family == "gaussian_noise":
        p = {"std": rng.choice(NOISE_STDS)}
    elif family == "impulse_noise":
        p = {"amount": rng.choice(IMPULSE_AMOUNTS), "salt_ratio": rng.choice(IMPULSE_SALT)}
    else:
        raise ConfigError(f"unknown disturbance family {family!r}")
    return DisturbanceSpec(family, p)


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian; sigma <= 0 is derived from the size."""
    if sigma <= 0:
        sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _convolve_taps(img: np.ndarray, taps: list[tuple[int, int, float]]) -> np.ndarray:
    """sum_j w_j * img[y + dy_j, x + dx_j] with reflect-101 borders."""
    h, w = img.shape[:2]
    pad = max(max(abs(dy), abs(dx)) for dy, dx, _ in taps)
    src = np.pad(img.astype(np.float64), ((pad, pad), (pad, pad), (0, 0)), mode="reflect")
    out = np.zeros((h, w, img.shape[2]))
    for dy, dx, wt in taps:
        out += wt * src[pad + dy:pad + dy + h, pad + dx:pad + dx + w]
    return out


def _separable(img: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    cx, cy = (len(kx) - 1) // 2, (len(ky) - 1) // 2
    tmp = _convolve_taps(img, [(0, i - cx, wt) for i, wt in enumerate(kx)])
    return _convolve_taps(tmp, [(i - cy, 0, wt) for i, wt in enumerate(ky)])


def blur(img: np.ndarray, ksize: tuple[int, int], sigma: tuple[float, float]) -> np.ndarray:
    """Gaussian blur; a zero y-sigma copies x-sigma, a zero x-sigma derives from size."""
    sx, sy = sigma
    if sy == 0:
        sy = sx
    kx, ky = gaussian_kernel(ksize[0], sx), gaussian_kernel(ksize[1], sy)
    return _quantize(_separable(img, kx, ky))


def motion_blur(img: np.ndarray, direction: str, size: int) -> np.ndarray:
    c = (size - 1) // 2
    wt = 1.0 / size
    if direction == "H":
        taps = [(0, i - c, wt) for i in range(size)]
    elif direction == "V":
        taps = [(i - c, 0, wt) for i in range(size)]
    elif direction == "D":
        taps = [(i - c, i - c, wt) for i in range(size)]
    else:
        raise ConfigError(f"unknown jitter direction {direction!r}")
    return _quantize(_convolve_taps(img, taps))


def _pixel_grid(h: int, w: int):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return yy + 0.5, xx + 0.5


def overexpose(img: np.ndarray, intensity: float, center: tuple[float, float]) -> np.ndarray:
    h, w = img.shape[:2]
    radius = min(h, w) / 3.0
    yy, xx = _pixel_grid(h, w)
    d = np.hypot(xx - center[0] * w, yy - center[1] * h)
    fall = np.clip(1.0 - d / radius, 0.0, 1.0)[..., None]
    p = img.astype(np.float64)
    return _quantize(p + intensity * (255.0 - p) * fall)


def occlude_disk(img: np.ndarray, center_x: float) -> np.ndarray:
    h, w = img.shape[:2]
    radius = min(h, w) / 4.0
    yy, xx = _pixel_grid(h, w)
    out = img.copy()
    out[np.hypot(xx - center_x * w, yy - h / 2.0) <= radius] = 0
    return out


def gaussian_noise(img: np.ndarray, std: float, rng: SplitMix64) -> np.ndarray:
    noise = rng.normals(img.size).reshape(img.shape) * std
    return _quantize(img.astype(np.float64) + noise)


def impulse_noise(img: np.ndarray, amount: float, salt_ratio: float,
                  rng: SplitMix64) -> np.ndarray:
    """Each pixel (all channels) is hit with probability ``amount``; a hit
    pixel becomes 255 with probability ``salt_ratio``, else 0."""
    h, w = img.shape[:2]
    hit = rng.uniforms(h * w).reshape(h, w) < amount
    salt = rng.uniforms(h * w).reshape(h, w) < salt_ratio
    out = img.copy()
    out[hit & salt] = 255
    out[hit & ~salt] = 0
    return out


def validate_image(img: np.ndarray) -> None:
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) uint8 frame, got {img.dtype} {img.shape}")


def apply_disturbance(img: np.ndarray, spec: DisturbanceSpec, ctx: DisturbanceContext,
                      rng: SplitMix64) -> np.ndarray:
    """Return a new frame; dimensions never change.

    ``frame_dropping`` replays ``ctx.last_clean`` and passes the frame
    through unchanged when no clean frame has been seen yet.
    """
    validate_image(img)
    f, p = spec.family, spec.params
    if f == "blurring":
        return blur(img, p["ksize"], p["sigma"])
    if f == "jittering":
        return motion_blur(img, p["direction"], p["size"])
    if f == "frame_dropping":
        return (ctx.last_clean if ctx.last_clean is not None else img).copy()
    if f == "full_occlusion":
        return np.zeros_like(img)
    if f == "overexposing":
        return overexpose(img, p["intensity"], p["center"])
    if f == "partial_occlusion":
        return occlude_disk(img, p["center_x"])
    if f == "gaussian_noise":
        return gaussian_noise(img, p["std"], rng)
    if f == "impulse_noise":
        return impulse_noise(img, p["amount"], p["salt_ratio"], rng)
    raise ConfigError(f"unknown disturbance family {f!r}")
