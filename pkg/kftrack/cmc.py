"""
Camera motion compensation.

A frame-to-frame camera motion is an :class:`Affine` ``p' = M p + T``. It is estimated from
point correspondences with RANSAC and applied to boxes and to Kalman states.
"""
import logging
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import ContractViolation, EstimationError
from .kalman import GaussianState
from .motion import BBox, ModelKind, position_indices, state_dim, velocity_indices

#: Smallest |det M| accepted for an estimated affine.
MIN_DETERMINANT = 1e-9


class Affine(NamedTuple):
    """Affine map ``p' = M p + T`` with a 2x2 linear part and a 2-vector translation."""
    M: np.ndarray
    T: np.ndarray

    @classmethod
    def identity(cls) -> 'Affine':
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def translation(cls, dx: float, dy: float) -> 'Affine':
        return cls(np.eye(2), np.array([dx, dy], dtype=float))

    @classmethod
    def from_row(cls, values: Sequence[float]) -> 'Affine':
        """Builds an affine from ``m00 m01 m10 m11 t0 t1``."""
        if len(values) != 6:
            raise ContractViolation("affine needs 6 values, got {}".format(len(values)))
        values = np.asarray(values, dtype=float)
        return cls(values[:4].reshape(2, 2), values[4:].copy())

    def to_row(self) -> Tuple[float, ...]:
        return tuple(float(v) for v in np.concatenate([self.M.ravel(), self.T]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Maps points of shape ``(2,)`` or ``(N, 2)``."""
        points = np.asarray(points, dtype=float)
        return points @ self.M.T + self.T

    @property
    def scale(self) -> Tuple[float, float]:
        """Scale factors along x and y: the norms of the columns of ``M``."""
        return float(np.linalg.norm(self.M[:, 0])), float(np.linalg.norm(self.M[:, 1]))

    def is_identity(self, tolerance: float = 0.0) -> bool:
        return bool(np.abs(self.M - np.eye(2)).max() <= tolerance and np.abs(self.T).max() <= tolerance)


def _fit(previous: np.ndarray, current: np.ndarray) -> Affine:
    design = np.hstack([previous, np.ones((len(previous), 1))])
    params, _, rank, _ = np.linalg.lstsq(design, current, rcond=None)
    if rank < 3:
        raise EstimationError("correspondences are collinear")
    return Affine(params[:2].T.copy(), params[2].copy())


def _errors(affine: Affine, previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    return np.linalg.norm(affine.apply(previous) - current, axis=1)


def estimate_affine(correspondences, ransac_iters: int = 200, inlier_px: float = 3.0,
                    seed=0) -> Tuple[Affine, np.ndarray]:
    """
    Estimates the affine mapping previous points onto current points.

    RANSAC draws 3-point minimal samples with a generator seeded by ``seed``, keeps the
    sample with most inliers (reprojection error ``<= inlier_px``) and refits it by least
    squares on its inlier set.

    :param correspondences: ``(p_prev, p_curr)`` pairs, array-like of shape ``(N, 2, 2)``.
    :return: The affine and the boolean inlier mask of the refit.
    :raise EstimationError: with fewer than 3 pairs or fewer than 3 inliers.
    """
    pairs = np.asarray(correspondences, dtype=float).reshape(-1, 2, 2)
    if len(pairs) < 3:
        raise EstimationError("affine estimation needs 3 correspondences, got {}".format(len(pairs)))
    previous, current = pairs[:, 0, :], pairs[:, 1, :]
    rng = np.random.default_rng(seed)
    best, best_count = None, 0
    for _ in range(ransac_iters):
        sample = rng.choice(len(pairs), size=3, replace=False)
        try:
            candidate = _fit(previous[sample], current[sample])
        except EstimationError:
            continue
        count = int((_errors(candidate, previous, current) <= inlier_px).sum())
        if count > best_count:
            best, best_count = candidate, count
            if count == len(pairs):
                break
    if best is None or best_count < 3:
        raise EstimationError("RANSAC found {} inliers out of {}".format(best_count, len(pairs)))
    inliers = _errors(best, previous, current) <= inlier_px
    affine = _fit(previous[inliers], current[inliers])
    if abs(np.linalg.det(affine.M)) < MIN_DETERMINANT:
        raise EstimationError("estimated affine is singular")
    mask = _errors(affine, previous, current) <= inlier_px
    logging.getLogger(__name__).debug("Affine estimated from {} of {} correspondences".format(
        int(mask.sum()), len(pairs)))
    return affine, mask


def synthesize_correspondences(affine: Affine, n_points: int, rng: np.random.Generator, width: float,
                               height: float, noise_px: float = 0.0, outlier_fraction: float = 0.0) -> np.ndarray:
    """
    Draws keypoints uniformly in a ``width`` x ``height`` image and maps them with ``affine``.

    :return: Correspondences of shape ``(n_points, 2, 2)``; a fraction of them is replaced by
        uniformly random destinations.
    """
    previous = rng.uniform((0.0, 0.0), (width, height), size=(n_points, 2))
    current = affine.apply(previous)
    if noise_px > 0:
        current = current + rng.normal(0.0, noise_px, size=current.shape)
    n_outliers = int(round(outlier_fraction * n_points))
    if n_outliers:
        index = rng.choice(n_points, size=n_outliers, replace=False)
        current[index] = rng.uniform((0.0, 0.0), (width, height), size=(n_outliers, 2))
    return np.stack([previous, current], axis=1)


def warp_box(a: Affine, b: BBox) -> BBox:
    """
    Maps a box through the affine; the result is the axis-aligned hull of its mapped corners.

    :raise ContractViolation: if the mapped box is degenerate.
    """
    x1, y1, x2, y2 = b.corners()
    mapped = a.apply(np.array([[x1, y1], [x2, y1], [x1, y2], [x2, y2]]))
    low, high = mapped.min(axis=0), mapped.max(axis=0)
    warped = BBox.from_corners(low[0], low[1], high[0], high[1])
    if not warped.is_valid():
        raise ContractViolation("box {} degenerates under camera motion".format(tuple(b)))
    return warped


def _lift(a: Affine, kind: ModelKind) -> (np.ndarray, Tuple[int, int]):
    position, velocity = position_indices(kind), velocity_indices(kind)
    lift = np.eye(state_dim(kind))
    lift[np.ix_(position, position)] = a.M
    lift[np.ix_(velocity, velocity)] = a.M
    sx, sy = a.scale
    if kind == ModelKind.WH:
        lift[2, 2] = lift[6, 6] = sx
        lift[3, 3] = lift[7, 7] = sy
    elif kind == ModelKind.SORT:
        # area and its rate scale with both axes, the aspect ratio with their quotient
        lift[2, 2] = lift[6, 6] = sx * sy
        lift[3, 3] = sx / sy
    return lift, position


def compensate_state(a: Affine, s: GaussianState, kind) -> GaussianState:
    """
    Moves a Kalman state into the current camera frame.

    Position is mapped by ``M p + T``, velocity by ``M``, sizes by the scale factors of ``M``;
    the covariance is transformed by the same linear lift.
    """
    kind = ModelKind.parse(kind)
    lift, position = _lift(a, kind)
    if s.mean.shape != (lift.shape[0],):
        raise ContractViolation("{} state has shape {}, expected ({},)".format(
            kind.value, s.mean.shape, lift.shape[0]))
    mean = lift @ s.mean
    mean[list(position)] += a.T
    covariance = lift @ s.covariance @ lift.T
    return GaussianState(mean, (covariance + covariance.T) / 2.0)
