"""Seeded perturbation generators, one per neighborhood kind.

Every generator is a pure function of (substream, base, epsilon): sample j of
a point is fully determined by (master_seed, point_id, j), so runs reproduce
bit for bit regardless of worker count or visitation order. Continuous
generators clamp into [0, 1], keeping the neighborhood inside the model's
legal input range. Random draws are consumed in a fixed order that never
depends on image content.
"""

from __future__ import annotations

import string

import numpy as np

from .core import DomainKind, DomainSpec, LabeledPoint
from .rng import SubstreamFactory

_LOWERCASE = np.array([ord(c) for c in string.ascii_lowercase], dtype=np.int64)

GLARE_RADIUS_RANGE = (0.1, 0.5)  # fraction of min(H, W)
SCRATCH_VALUE = 0.05
SCRATCH_MAX_SEGMENTS = 3
SCRATCH_MAX_WIDTH = 3


def sample_linf(base: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform box noise: each component moves by at most epsilon, then clamps."""
    if epsilon == 0.0:
        return base.copy()
    u = rng.uniform(-epsilon, epsilon, size=base.shape)
    return np.clip(base + u, 0.0, 1.0)


def sample_gaussian(base: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Gaussian sensor noise with standard deviation epsilon, clamped."""
    if epsilon == 0.0:
        return base.copy()
    noise = rng.normal(0.0, epsilon, size=base.shape)
    return np.clip(base + noise, 0.0, 1.0)


def _require_image(shape: tuple[int, ...], what: str) -> tuple[int, int, int]:
    if len(shape) != 3:
        raise ValueError(f"{what} perturbation needs an HxWxC image, got shape {shape}")
    return shape


def sample_glare(
    base: np.ndarray, epsilon: float, rng: np.random.Generator, shape: tuple[int, ...]
) -> np.ndarray:
    """Additive radial brightness spot: peak epsilon at a random pixel, quadratic falloff."""
    h, w, c = _require_image(shape, "glare")
    if epsilon == 0.0:
        return base.copy()
    img = base.reshape(h, w, c).copy()
    cy = int(rng.integers(0, h))
    cx = int(rng.integers(0, w))
    r = rng.uniform(GLARE_RADIUS_RANGE[0], GLARE_RADIUS_RANGE[1]) * min(h, w)
    yy, xx = np.ogrid[0:h, 0:w]
    dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
    kernel = epsilon * np.maximum(0.0, 1.0 - dist / r) ** 2
    img += kernel[:, :, np.newaxis]
    return np.clip(img, 0.0, 1.0).reshape(-1)


def _segment_mask(h: int, w: int, p0, p1, width: float) -> np.ndarray:
    """Pixels whose center lies within width/2 of the segment p0-p1."""
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.stack([p1[0] - p0[0], p1[1] - p0[1]])
    pts = np.stack([yy - p0[0], xx - p0[1]])
    seg_len2 = float(d[0] ** 2 + d[1] ** 2)
    if seg_len2 == 0.0:
        dist = np.sqrt(pts[0] ** 2 + pts[1] ** 2)
    else:
        t = np.clip((pts[0] * d[0] + pts[1] * d[1]) / seg_len2, 0.0, 1.0)
        dist = np.sqrt((pts[0] - t * d[0]) ** 2 + (pts[1] - t * d[1]) ** 2)
    return dist <= width / 2.0


def sample_scratch(
    base: np.ndarray, epsilon: float, rng: np.random.Generator, shape: tuple[int, ...]
) -> np.ndarray:
    """Dark line segments subject to a hard painted-area budget of epsilon * H * W pixels.

    Segment parameters are all drawn before any budget decision, so the RNG
    consumption (and thus every other sample) is independent of which
    segments fit the budget.
    """
    h, w, c = _require_image(shape, "scratch")
    budget = int(np.floor(epsilon * h * w))
    n_seg = int(rng.integers(1, SCRATCH_MAX_SEGMENTS + 1))
    params = []
    for _ in range(n_seg):
        y0, y1 = rng.integers(0, h), rng.integers(0, h)
        x0, x1 = rng.integers(0, w), rng.integers(0, w)
        width = int(rng.integers(1, SCRATCH_MAX_WIDTH + 1))
        params.append(((int(y0), int(x0)), (int(y1), int(x1)), width))
    if budget <= 0:
        return base.copy()
    painted = np.zeros((h, w), dtype=bool)
    for p0, p1, width in params:
        mask = _segment_mask(h, w, p0, p1, width)
        union = painted | mask
        if int(union.sum()) <= budget:
            painted = union
    img = base.reshape(h, w, c).copy()
    img[painted] = SCRATCH_VALUE
    return img.reshape(-1)


def sample_char_substitute(base: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Replace min(epsilon, length) distinct positions with random lowercase letters."""
    codes = np.asarray(base, dtype=np.int64)
    if codes.size == 0:
        raise ValueError("cannot perturb an empty codepoint sequence")
    n_sub = min(int(epsilon), codes.size)
    out = codes.copy()
    if n_sub == 0:
        return out.astype(np.float64)
    positions = rng.choice(codes.size, size=n_sub, replace=False)
    for pos in positions:
        candidates = _LOWERCASE[_LOWERCASE != codes[pos]]
        out[pos] = candidates[int(rng.integers(0, candidates.size))]
    return out.astype(np.float64)


def sample_domain(
    domain: DomainSpec, point: LabeledPoint, rng: np.random.Generator
) -> np.ndarray:
    """Dispatch one draw from the domain's neighborhood around the point."""
    kind = domain.kind
    if kind is DomainKind.LINF_UNIFORM:
        return sample_linf(point.input, domain.epsilon, rng)
    if kind in (DomainKind.GAUSSIAN, DomainKind.THERMAL):
        return sample_gaussian(point.input, domain.epsilon, rng)
    if kind is DomainKind.GLARE:
        return sample_glare(point.input, domain.epsilon, rng, point.shape)
    if kind is DomainKind.SCRATCH:
        return sample_scratch(point.input, domain.epsilon, rng, point.shape)
    if kind is DomainKind.CHAR_SUBSTITUTE:
        return sample_char_substitute(point.input, domain.epsilon, rng)
    raise ValueError(f"no generator for domain kind {kind}")


def sample_linf_band(
    base: np.ndarray,
    eps_lo: float,
    eps_hi: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform box noise conditioned on eps_lo <= max|u_i| <= eps_hi.

    Exact conditional decomposition: the max-magnitude M has CDF (m/eps)^d, so
    M is drawn by inverse CDF restricted to the band; one uniformly chosen
    coordinate sits at +-M and the rest are uniform on [-M, M].
    """
    d = base.size
    u01 = rng.uniform(0.0, 1.0)
    m = (eps_lo**d + u01 * (eps_hi**d - eps_lo**d)) ** (1.0 / d)
    u = rng.uniform(-m, m, size=d)
    axis = int(rng.integers(0, d))
    sign = 1.0 if rng.uniform(0.0, 1.0) < 0.5 else -1.0
    u[axis] = sign * m
    return np.clip(base + u, 0.0, 1.0)


class SampleStream:
    """Deterministic per-sample view of a domain's neighborhood around one point."""

    def __init__(self, domain: DomainSpec, point: LabeledPoint, master_seed: int):
        self.domain = domain
        self.point = point
        self.master_seed = master_seed
        self._factory = SubstreamFactory()

    def rng(self, index: int) -> np.random.Generator:
        return self._factory.at(self.master_seed, self.point.id, index)

    def sample(self, index: int) -> np.ndarray:
        return sample_domain(self.domain, self.point, self.rng(index))

    def draw(self, count: int) -> list[np.ndarray]:
        return [self.sample(j) for j in range(count)]
