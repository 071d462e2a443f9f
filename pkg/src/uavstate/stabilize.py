"""Hover-drift compensation from point correspondences.

Frames are registered to a reference frame with a 4-DoF similarity
transform ``ref = s * R(theta) @ cur + t``, estimated robustly with an
MLESAC loop. Points are handled as complex numbers internally, which turns
the similarity into the affine map ``z -> a*z + b`` with ``a = s*exp(i*theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, NoConsensus


@dataclass(frozen=True)
class Correspondence:
    ref_pt: tuple[float, float]
    cur_pt: tuple[float, float]


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float = 1.0
    rotation: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    @property
    def _a(self) -> complex:
        return self.scale * complex(math.cos(self.rotation), math.sin(self.rotation))

    @property
    def _b(self) -> complex:
        return complex(self.translation[0], self.translation[1])

    @classmethod
    def _from_ab(cls, a: complex, b: complex) -> SimilarityTransform:
        return cls(abs(a), math.atan2(a.imag, a.real), (b.real, b.imag))

    def inverse(self) -> SimilarityTransform:
        a_inv = 1.0 / self._a
        return self._from_ab(a_inv, -self._b * a_inv)

    def compose(self, other: SimilarityTransform) -> SimilarityTransform:
        """``self`` after ``other``."""
        return self._from_ab(self._a * other._a, self._a * other._b + self._b)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array(
            [
                [self.scale * c, -self.scale * s, self.translation[0]],
                [self.scale * s, self.scale * c, self.translation[1]],
                [0.0, 0.0, 1.0],
            ]
        )


IDENTITY = SimilarityTransform()


@dataclass(frozen=True)
class RobustFitReport:
    inlier_count: int
    inlier_ratio: float
    residual_rms: float
    iterations_used: int


@dataclass(frozen=True)
class RobustFitConfig:
    sigma: float = 1.0
    inlier_sigmas: float = 3.0
    gamma: float = 0.5  # fixed inlier mixing weight
    outlier_area: float = 1920.0 * 1080.0  # px^2, support of the uniform outlier density
    confidence: float = 0.99
    max_iterations: int = 2000
    min_inlier_ratio: float = 0.3
    min_sample_separation: float = 1.0
    scale_gate: tuple[float, float] = (0.5, 2.0)
    seed: int = 0

    @property
    def threshold(self) -> float:
        return self.inlier_sigmas * self.sigma


def _as_complex(pts) -> np.ndarray:
    p = np.asarray(pts, dtype=float).reshape(-1, 2)
    return p[:, 0] + 1j * p[:, 1]


def apply_transform(t: SimilarityTransform, pts) -> np.ndarray:
    """Map current-frame pixels into reference-frame pixels."""
    arr = np.asarray(pts, dtype=float)
    z = t._a * _as_complex(arr) + t._b
    return np.stack([z.real, z.imag], axis=-1).reshape(arr.shape)


def solve_two_point(ref, cur) -> SimilarityTransform:
    """Exact similarity through two correspondences."""
    r = _as_complex(ref)
    c = _as_complex(cur)
    dc = c[1] - c[0]
    if dc == 0:
        raise DegenerateSample("coincident sample points")
    a = (r[1] - r[0]) / dc
    return SimilarityTransform._from_ab(a, r[0] - a * c[0])


def solve_least_squares(ref, cur) -> SimilarityTransform:
    r = _as_complex(ref)
    c = _as_complex(cur)
    rm, cm = r.mean(), c.mean()
    rc, cc = r - rm, c - cm
    den = float(np.sum(np.abs(cc) ** 2))
    if den == 0.0:
        raise DegenerateSample("all current points coincide")
    a = complex(np.sum(np.conj(cc) * rc)) / den
    return SimilarityTransform._from_ab(a, rm - a * cm)


def _sq_residuals(a: complex, b: complex, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.abs(r - (a * c + b)) ** 2


def mlesac_cost(sq_res: np.ndarray, cfg: RobustFitConfig) -> float:
    """Negative log-likelihood under the Gaussian/uniform mixture."""
    s2 = cfg.sigma**2
    p_in = cfg.gamma * np.exp(-sq_res / (2.0 * s2)) / (2.0 * math.pi * s2)
    p_out = (1.0 - cfg.gamma) / cfg.outlier_area
    return float(-np.sum(np.log(p_in + p_out)))


def transform_cost(t: SimilarityTransform, corrs_ref, corrs_cur, cfg: RobustFitConfig) -> float:
    r, c = _as_complex(corrs_ref), _as_complex(corrs_cur)
    return mlesac_cost(_sq_residuals(t._a, t._b, r, c), cfg)


def _split(corrs) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([k.ref_pt for k in corrs], dtype=float).reshape(-1, 2)
    cur = np.array([k.cur_pt for k in corrs], dtype=float).reshape(-1, 2)
    return ref, cur


def estimate_transform(
    corrs, config: RobustFitConfig | None = None
) -> tuple[SimilarityTransform, RobustFitReport]:
    """MLESAC estimate of the cur->ref similarity, refined on its inliers.

    ``corrs`` is a list of `Correspondence` or a pair of (N, 2) arrays
    ``(ref, cur)``.
    """
    cfg = config or RobustFitConfig()
    if isinstance(corrs, tuple) and len(corrs) == 2 and not isinstance(corrs[0], Correspondence):
        ref, cur = (np.asarray(x, dtype=float).reshape(-1, 2) for x in corrs)
    else:
        ref, cur = _split(list(corrs))
    n = len(ref)
    if n < 2:
        raise NoConsensus(f"need at least 2 correspondences, got {n}")
    r, c = _as_complex(ref), _as_complex(cur)
    rng = np.random.default_rng(cfg.seed)
    thr2 = cfg.threshold**2

    best_cost = math.inf
    best_ab: tuple[complex, complex] | None = None
    needed = cfg.max_iterations
    it = 0
    degenerate = 0
    while it < min(needed, cfg.max_iterations):
        it += 1
        i, j = rng.choice(n, size=2, replace=False)
        dc = c[j] - c[i]
        if abs(dc) < cfg.min_sample_separation or abs(r[j] - r[i]) < cfg.min_sample_separation:
            degenerate += 1
            continue
        a = (r[j] - r[i]) / dc
        if not cfg.scale_gate[0] <= abs(a) <= cfg.scale_gate[1]:
            continue
        b = r[i] - a * c[i]
        sq = _sq_residuals(a, b, r, c)
        cost = mlesac_cost(sq, cfg)
        if cost < best_cost:
            best_cost, best_ab = cost, (a, b)
            w = float(np.count_nonzero(sq < thr2)) / n
            needed = _required_iterations(w, cfg.confidence, cfg.max_iterations)

    if best_ab is None:
        if degenerate == it:
            raise DegenerateSample("every minimal sample was degenerate")
        raise NoConsensus("no hypothesis passed the scale plausibility gate")

    a, b = best_ab
    inl = _sq_residuals(a, b, r, c) < thr2
    if np.count_nonzero(inl) >= 2:
        fit = solve_least_squares(ref[inl], cur[inl])
        sq = _sq_residuals(fit._a, fit._b, r, c)
        inl2 = sq < thr2
        if np.count_nonzero(inl2) >= 2:
            inl = inl2
            fit = solve_least_squares(ref[inl], cur[inl])
    else:
        fit = SimilarityTransform._from_ab(a, b)
    sq = _sq_residuals(fit._a, fit._b, r, c)
    inl = sq < thr2
    k = int(np.count_nonzero(inl))
    ratio = k / n
    rms = float(np.sqrt(np.mean(sq[inl]))) if k else math.inf
    report = RobustFitReport(k, ratio, rms, it)
    if ratio < cfg.min_inlier_ratio:
        raise NoConsensus(f"inlier ratio {ratio:.3f} below {cfg.min_inlier_ratio}")
    return fit, report


def _required_iterations(w: float, confidence: float, cap: int) -> int:
    if w <= 0.0:
        return cap
    p_good = w * w
    if p_good >= 1.0:
        return 1
    return min(cap, int(math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p_good))))
