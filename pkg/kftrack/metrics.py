"""
Trajectory accuracy and timing metrics.

Accuracy is measured on box centers: the average displacement error (ADE) is the mean Euclidean
distance between paired predicted and ground-truth points, the average Mahalanobis distance (AMD)
weights the displacement by a 2x2 covariance. Frames without a prediction are excluded from both
and reported through coverage.
"""
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .assoc import iou
from .errors import ContractViolation, UndefinedMetricError
from .motion import BBox
from .tracks import FrameResult, TrackOutput


#: Physical size of one pixel on the court, in centimetres.
PIXEL_TO_CM = 0.026

#: Racquetball benchmark ADE (px) and AMD per tracker and scenario 1-4. Reference only.
PUBLISHED_ACCURACY = {
    'deepocsort': ((22.97, 0.69), (31.31, 0.91), (50.42, 0.91), (19.9, 0.87)),
    'ocsort': ((65.26, 1.83), (93.5, 2.54), (111.8, 2.54), (39.16, 2.09)),
    'strongsort': ((99.82, 2.86), (169.7, 23.9), (157.22, 23.9), (153.7, 2.84)),
    'botsort': ((51.7, 1.81), (158.0, 11.59), (74.11, 11.59), (178.5, 1.67)),
    'bytetrack': ((39.4, 3.22), (146.4, 13.02), (56.48, 13.02), (215.0, 2.39)),
}

#: Racquetball benchmark inference and update time (ms) per tracker and scenario 1-4. Reference only.
PUBLISHED_TIMING = {
    'deepocsort': ((31.1, 61.5), (24.8, 34.1), (24.9, 36.9), (26.2, 34.5)),
    'ocsort': ((30.8, 9.6), (24.7, 4.9), (24.7, 4.4), (24.8, 6.5)),
    'strongsort': ((31.1, 39.5), (24.9, 24.4), (25.4, 24.5), (25.3, 27.1)),
    'botsort': ((32.0, 60.5), (24.8, 34.7), (25.3, 36.0), (26.5, 39.0)),
    'bytetrack': ((32.5, 1.4), (24.7, 0.6), (24.7, 0.6), (24.6, 0.6)),
}


class Trajectory(NamedTuple):
    """Box centers ordered by strictly increasing frame."""
    points: List[Tuple[int, Tuple[float, float]]]

    @classmethod
    def from_boxes(cls, boxes: Dict[int, BBox]) -> 'Trajectory':
        return cls([(f, boxes[f].center) for f in sorted(boxes)])

    @property
    def frames(self) -> List[int]:
        return [f for f, _ in self.points]

    def as_dict(self) -> Dict[int, Tuple[float, float]]:
        return dict(self.points)

    def array(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=float).reshape(-1, 2)


class AmdContext(NamedTuple):
    """Covariance of the Mahalanobis form and the ridge added to it."""
    sigma: np.ndarray
    epsilon: float = 0.0


class EvalReport(NamedTuple):
    """Accuracy of one tracker run. ``ade`` and ``amd`` are None when no frame was paired."""
    ade: Optional[float]
    amd: Optional[float]
    n_pairs: int
    coverage: float
    n_fragments: int = 0
    mean_inference_ms: Optional[float] = None
    mean_update_ms: Optional[float] = None
    pixel_to_cm: float = PIXEL_TO_CM

    @property
    def ade_cm(self) -> Optional[float]:
        return None if self.ade is None else self.ade * self.pixel_to_cm


class MatchResult(NamedTuple):
    """Predicted trajectory selected from tracker outputs, and the matched track id per frame."""
    trajectory: Trajectory
    track_ids: Dict[int, int]


def pair_frames(pred: Trajectory, truth: Trajectory) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs predicted and true points of the frames present in both trajectories."""
    predicted = pred.as_dict()
    return [(np.array(predicted[f], dtype=float), np.array(p, dtype=float))
            for f, p in truth.points if f in predicted]


def coverage(pred: Trajectory, truth: Trajectory) -> float:
    """Fraction of ground-truth frames with a prediction."""
    if not truth.points:
        return 0.0
    predicted = set(pred.frames)
    return sum(1 for f in truth.frames if f in predicted) / len(truth.points)


def _displacements(pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2, 2)
    if len(pairs) == 0:
        raise UndefinedMetricError("metric is undefined on zero pairs")
    return pairs[:, 0, :] - pairs[:, 1, :]


def ade(pairs) -> float:
    """Mean Euclidean distance over ``(p_pred, p_truth)`` pairs."""
    return float(np.mean(np.linalg.norm(_displacements(pairs), axis=1)))


def amd(pairs, ctx: AmdContext) -> float:
    """
    Mean Mahalanobis distance ``sqrt(d^T (sigma + epsilon I)^-1 d)`` over pairs.

    :raise ContractViolation: if ``sigma + epsilon I`` is not positive definite.
    """
    d = _displacements(pairs)
    matrix = np.asarray(ctx.sigma, dtype=float) + ctx.epsilon * np.eye(2)
    try:
        factor = scipy.linalg.cho_factor(matrix)
    except (np.linalg.LinAlgError, ValueError):
        raise ContractViolation("AMD covariance {} is not positive definite".format(matrix.tolist()))
    squared = np.sum(d * scipy.linalg.cho_solve(factor, d.T).T, axis=1)
    return float(np.mean(np.sqrt(np.maximum(squared, 0.0))))


def estimate_sigma(truth: Trajectory, epsilon: Optional[float] = None) -> AmdContext:
    """
    Population covariance of the ground-truth points.

    :param epsilon: Ridge; defaults to ``max(1e-6 * trace, 1e-9)``.
    :raise ContractViolation: with fewer than 2 points.
    """
    points = truth.array()
    if len(points) < 2:
        raise ContractViolation("covariance needs 2 points, got {}".format(len(points)))
    sigma = np.cov(points, rowvar=False, bias=True)
    if epsilon is None:
        epsilon = max(1e-6 * float(np.trace(sigma)), 1e-9)
    return AmdContext(sigma, epsilon)


def timing_report(frame_results: Sequence[FrameResult]) -> (float, float):
    """
    :return: Mean inference and mean update time in milliseconds.
    :raise ContractViolation: without frames.
    """
    if not frame_results:
        raise ContractViolation("timing report needs at least one frame")
    return (float(np.mean([r.inference_ms for r in frame_results])),
            float(np.mean([r.update_ms for r in frame_results])))


def _rank(output: TrackOutput, truth: BBox) -> Tuple[float, float, int]:
    (x, y), (u, v) = output.bbox.center, truth.center
    return -iou(output.bbox, truth), float(np.hypot(x - u, y - v)), output.track_id


def match_outputs(outputs_by_frame: Dict[int, List[TrackOutput]], truth_boxes: Dict[int, BBox]) -> MatchResult:
    """
    Reduces multi-track output to a single predicted trajectory: in every ground-truth frame the
    output with the highest IoU is chosen, ties broken by center distance and then by lowest id.
    """
    points, track_ids = [], dict()
    for frame in sorted(truth_boxes):
        outputs = outputs_by_frame.get(frame)
        if not outputs:
            continue
        best = min(outputs, key=lambda o: _rank(o, truth_boxes[frame]))
        points.append((frame, best.bbox.center))
        track_ids[frame] = best.track_id
    return MatchResult(Trajectory(points), track_ids)


def covered_frames(outputs_by_frame: Dict[int, List[TrackOutput]], truth_boxes: Dict[int, BBox],
                   threshold: float = 0.5) -> List[int]:
    """Ground-truth frames where some output overlaps the true box with IoU at least ``threshold``."""
    return [f for f in sorted(truth_boxes)
            if any(iou(o.bbox, truth_boxes[f]) >= threshold for o in outputs_by_frame.get(f, []))]


def count_fragments(track_ids: Iterable[Optional[int]]) -> int:
    """Number of contiguous runs of equal ids in a sequence; None entries are skipped."""
    fragments, previous = 0, None
    for track_id in track_ids:
        if track_id is None:
            continue
        if track_id != previous:
            fragments += 1
            previous = track_id
    return fragments


def evaluate_targets(truth_by_target: Dict[int, Dict[int, BBox]], outputs_by_frame: Dict[int, List[TrackOutput]],
                     timing: Optional[Tuple[float, float]] = None, ctx: Optional[AmdContext] = None,
                     pixel_to_cm: float = PIXEL_TO_CM) -> EvalReport:
    """
    Scores tracker outputs against one or more ground-truth targets. Every target is matched
    independently; pairs, coverage and fragments are pooled over targets.

    :param timing: Mean inference and update time, as returned by :func:`timing_report`.
    :param ctx: Covariance for AMD; estimated from the pooled ground truth when omitted.
    """
    pairs, covered, total, fragments, points = [], 0, 0, 0, []
    for target in sorted(truth_by_target):
        truth_boxes = truth_by_target[target]
        truth = Trajectory.from_boxes(truth_boxes)
        matched = match_outputs(outputs_by_frame, truth_boxes)
        pairs += pair_frames(matched.trajectory, truth)
        covered += len(matched.trajectory.points)
        total += len(truth.points)
        fragments += count_fragments(matched.track_ids[f] for f in sorted(matched.track_ids))
        points += truth.points
    if ctx is None and len(points) >= 2:
        ctx = estimate_sigma(Trajectory(points))
    inference_ms, update_ms = timing if timing else (None, None)
    return EvalReport(ade=ade(pairs) if pairs else None,
                      amd=amd(pairs, ctx) if pairs and ctx is not None else None,
                      n_pairs=len(pairs), coverage=covered / total if total else 0.0, n_fragments=fragments,
                      mean_inference_ms=inference_ms, mean_update_ms=update_ms, pixel_to_cm=pixel_to_cm)


def evaluate(truth_boxes: Dict[int, BBox], outputs_by_frame: Dict[int, List[TrackOutput]],
             timing: Optional[Tuple[float, float]] = None, ctx: Optional[AmdContext] = None,
             pixel_to_cm: float = PIXEL_TO_CM) -> EvalReport:
    """Scores tracker outputs against a single ground-truth target."""
    return evaluate_targets({0: truth_boxes}, outputs_by_frame, timing, ctx, pixel_to_cm)
