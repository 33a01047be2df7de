"""
Gap filling for completed tracklets: linear interpolation and Gaussian-process smoothing.
"""
import logging
from typing import List, NamedTuple, Tuple

import numpy as np
import scipy.linalg

from .errors import ContractViolation
from .kalman import MAX_CONDITION
from .motion import BBox


class Tracklet(NamedTuple):
    """Boxes of one track id, ordered by strictly increasing frame."""
    id: int
    samples: List[Tuple[int, BBox]]

    @property
    def frames(self) -> List[int]:
        return [f for f, _ in self.samples]

    def check(self) -> 'Tracklet':
        if not self.samples:
            raise ContractViolation("tracklet {} has no samples".format(self.id))
        frames = self.frames
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ContractViolation("tracklet {} frames are not strictly increasing".format(self.id))
        return self


class GsiResult(NamedTuple):
    """Smoothed tracklet, and whether the linear fallback was used."""
    tracklet: Tracklet
    used_fallback: bool


def _gaps(t: Tracklet, max_gap: int):
    """Yields consecutive sample pairs separated by 1 to ``max_gap`` missing frames."""
    for (f1, b1), (f2, b2) in zip(t.samples, t.samples[1:]):
        if 0 < f2 - f1 - 1 <= max_gap:
            yield (f1, b1), (f2, b2)


def _lerp(f1: int, b1: BBox, f2: int, b2: BBox, f: int) -> BBox:
    ratio = (f - f1) / (f2 - f1)
    return BBox(*(u + (v - u) * ratio for u, v in zip(b1, b2)))


def linear_interpolate(t: Tracklet, max_gap: int = 20) -> Tracklet:
    """
    Fills each gap of at most ``max_gap`` missing frames with boxes linearly interpolated
    between the samples around it. Existing samples are kept as they are.
    """
    t.check()
    filled = list(t.samples)
    for (f1, b1), (f2, b2) in _gaps(t, max_gap):
        filled.extend((f, _lerp(f1, b1, f2, b2, f)) for f in range(f1 + 1, f2))
    filled.sort(key=lambda sample: sample[0])
    return Tracklet(t.id, filled)


def _kernel(a: np.ndarray, b: np.ndarray, length_scale: float) -> np.ndarray:
    return np.exp(-np.subtract.outer(a, b) ** 2 / (2.0 * length_scale ** 2))


def gsi_smooth(t: Tracklet, length_scale: float = 10.0, noise_var: float = 0.25, max_gap: int = 20) -> GsiResult:
    """
    Gaussian-smoothed interpolation.

    Each of center x, center y, width and height is regressed on the frame index by an
    independent Gaussian process with squared-exponential kernel and prior mean equal to the
    sample mean. The result holds the posterior mean at the observed frames and at the frames of
    gaps of at most ``max_gap``.

    Falls back to :func:`linear_interpolate` if the kernel matrix has condition number above
    1e12 or the smoothed boxes are degenerate.

    :raise ContractViolation: on fewer than 2 samples or non-positive hyperparameters.
    """
    t.check()
    if len(t.samples) < 2:
        raise ContractViolation("GSI needs 2 samples, tracklet {} has {}".format(t.id, len(t.samples)))
    if length_scale <= 0 or noise_var < 0:
        raise ContractViolation("invalid GSI hyperparameters length_scale={} noise_var={}".format(
            length_scale, noise_var))
    logger = logging.getLogger(__name__)
    frames = np.array(t.frames, dtype=float)
    queries = sorted(set(t.frames) | {f for (f1, _), (f2, _) in _gaps(t, max_gap) for f in range(f1 + 1, f2)})
    queries = np.array(queries, dtype=float)
    values = np.array([[b.center[0], b.center[1], b.w, b.h] for _, b in t.samples])
    kernel = _kernel(frames, frames, length_scale) + noise_var * np.eye(len(frames))
    condition = np.linalg.cond(kernel)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        logger.debug("Tracklet {} kernel condition {:.3g}, using linear interpolation".format(t.id, condition))
        return GsiResult(linear_interpolate(t, max_gap), True)
    prior = values.mean(axis=0)
    weights = scipy.linalg.solve(kernel, values - prior, assume_a='pos')
    smoothed = prior + _kernel(queries, frames, length_scale) @ weights
    boxes = [BBox.from_center(*row) for row in smoothed]
    if not all(b.is_valid() for b in boxes):
        logger.debug("Tracklet {} smoothed to a degenerate box, using linear interpolation".format(t.id))
        return GsiResult(linear_interpolate(t, max_gap), True)
    return GsiResult(Tracklet(t.id, [(int(f), b) for f, b in zip(queries, boxes)]), False)
