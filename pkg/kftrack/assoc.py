"""
Association costs between predicted tracks and detections, and optimal assignment.

Cost matrices have tracks as rows and detections as columns. Infeasible entries hold
:data:`SENTINEL` and are never returned as matches.
"""
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from .errors import ContractViolation
from .motion import BBox


#: Cost of an infeasible track/detection pair.
SENTINEL = np.inf


class Assignment(NamedTuple):
    """Result of an assignment: matched ``(track, detection)`` index pairs and the leftovers."""
    pairs: List[Tuple[int, int]]
    unmatched_tracks: List[int]
    unmatched_detections: List[int]

    @classmethod
    def empty(cls, n_tracks: int, n_detections: int) -> 'Assignment':
        return cls([], list(range(n_tracks)), list(range(n_detections)))


def _as_boxes(boxes) -> np.ndarray:
    return np.asarray(boxes, dtype=float).reshape(-1, 4)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    w = min(ax2, bx2) - max(ax1, bx1)
    h = min(ay2, by2) - max(ay1, by1)
    if w <= 0 or h <= 0:
        return 0.0
    intersection = w * h
    return intersection / (a.area + b.area - intersection)


def iou_matrix(tracks: Sequence[BBox], detections: Sequence[BBox]) -> np.ndarray:
    """Pairwise :func:`iou` of two box lists, shape ``(len(tracks), len(detections))``."""
    a, b = _as_boxes(tracks), _as_boxes(detections)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ax1, ay1 = a[:, 0:1], a[:, 1:2]
    ax2, ay2 = ax1 + a[:, 2:3], ay1 + a[:, 3:4]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = bx1 + b[:, 2], by1 + b[:, 3]
    w = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0.0, None)
    h = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0.0, None)
    intersection = w * h
    union = a[:, 2:3] * a[:, 3:4] + b[:, 2] * b[:, 3] - intersection
    return intersection / union


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """
    ``1 - cos(u, v)``, in [0, 2].

    :raise ContractViolation: on zero vectors or length mismatch.
    """
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ContractViolation("embeddings have shapes {} and {}".format(u.shape, v.shape))
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ContractViolation("cosine distance of a zero vector")
    return float(np.clip(1.0 - u @ v / (nu * nv), 0.0, 2.0))


def cosine_distance_matrix(tracks: np.ndarray, detections: np.ndarray) -> np.ndarray:
    """Pairwise :func:`cosine_distance` between the rows of two embedding matrices."""
    a = np.asarray(tracks, dtype=float)
    b = np.asarray(detections, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    if a.shape[1] != b.shape[1]:
        raise ContractViolation("embedding dimensions {} and {} differ".format(a.shape[1], b.shape[1]))
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if (na == 0).any() or (nb == 0).any():
        raise ContractViolation("cosine distance of a zero vector")
    return np.clip(1.0 - (a / na) @ (b / nb).T, 0.0, 2.0)


def fuse_bot(d_iou: np.ndarray, d_cos: np.ndarray, theta_iou: float = 0.5, theta_emb: float = 0.25) -> np.ndarray:
    """
    Fuses IoU and appearance distances by taking their minimum. Appearance is only trusted
    where it is below ``theta_emb`` and the pair passes the IoU gate; pairs failing the IoU
    gate are infeasible.
    """
    d_iou, d_cos = np.asarray(d_iou, dtype=float), np.asarray(d_cos, dtype=float)
    if d_iou.shape != d_cos.shape:
        raise ContractViolation("IoU distance shape {} differs from cosine distance shape {}".format(
            d_iou.shape, d_cos.shape))
    gated = d_iou < theta_iou
    appearance = np.where(gated & (d_cos < theta_emb), d_cos, SENTINEL)
    return np.where(gated, np.minimum(d_iou, appearance), SENTINEL)


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    return math.acos(float(np.clip(u @ v, -1.0, 1.0)))


def ocm_cost(track_direction: Optional[np.ndarray], candidate_direction: np.ndarray, lambda_ocm: float = 0.2) -> float:
    """Velocity-consistency cost ``lambda_ocm * angle / pi``; zero when the track has no direction yet."""
    if track_direction is None:
        return 0.0
    return lambda_ocm * _angle(np.asarray(track_direction, dtype=float),
                               np.asarray(candidate_direction, dtype=float)) / math.pi


def unit_direction(start, end) -> Optional[np.ndarray]:
    """Unit vector from ``start`` to ``end``, or None if they coincide."""
    delta = np.asarray(end, dtype=float) - np.asarray(start, dtype=float)
    norm = np.linalg.norm(delta)
    if norm == 0:
        return None
    return delta / norm


def ocm_cost_matrix(anchors: Sequence[Optional[np.ndarray]], directions: Sequence[Optional[np.ndarray]],
                    centers: np.ndarray, lambda_ocm: float = 0.2) -> np.ndarray:
    """
    :func:`ocm_cost` for every track/detection pair.

    :param anchors: Per track, the older observation center the direction was measured from.
    :param directions: Per track, its unit motion direction or None.
    :param centers: Detection centers, shape ``(D, 2)``.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    cost = np.zeros((len(directions), len(centers)))
    for i, (anchor, direction) in enumerate(zip(anchors, directions)):
        if direction is None or anchor is None:
            continue
        delta = centers - np.asarray(anchor, dtype=float)
        norms = np.linalg.norm(delta, axis=1)
        valid = norms > 0
        cosine = np.clip(delta[valid] @ direction / norms[valid], -1.0, 1.0)
        cost[i, valid] = lambda_ocm * np.arccos(cosine) / math.pi
    return cost


def _lexicographic(padded: np.ndarray) -> List[int]:
    """
    Column of every row in the optimal assignment of a square matrix whose column sequence,
    read in row order, is lexicographically smallest.

    Each row in turn takes the lowest free column that still admits an optimal completion.
    Totals within a relative 1e-9 of the optimum count as optimal.
    """
    n = len(padded)
    rows, columns = scipy.optimize.linear_sum_assignment(padded)
    completion = dict(zip(rows.tolist(), columns.tolist()))
    optimum = float(padded[rows, columns].sum())
    tolerance = 1e-9 * max(1.0, abs(optimum))
    chosen, used, prefix = [], set(), 0.0
    for r in range(n):
        rest_rows = list(range(r + 1, n))
        for c in range(completion[r]):
            if c in used:
                continue
            rest_columns = [j for j in range(n) if j not in used and j != c]
            total = prefix + padded[r, c]
            if rest_rows:
                sub = padded[np.ix_(rest_rows, rest_columns)]
                sub_rows, sub_columns = scipy.optimize.linear_sum_assignment(sub)
                total += float(sub[sub_rows, sub_columns].sum())
            if total <= optimum + tolerance:
                completion[r] = c
                if rest_rows:
                    completion.update((rest_rows[i], rest_columns[j]) for i, j in zip(sub_rows, sub_columns))
                break
        chosen.append(completion[r])
        used.add(completion[r])
        prefix += padded[r, completion[r]]
    return chosen


def hungarian(cost: np.ndarray) -> Assignment:
    """
    Minimum-cost assignment over the feasible entries of a (possibly rectangular) cost matrix.

    Infeasible entries are replaced by a constant large enough that any matching using fewer
    of them is cheaper, so the result has maximum cardinality among feasible matchings and
    minimum total cost among those. Equal-cost alternatives resolve row by row, each row taking
    the lowest column it can.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ContractViolation("cost matrix must be 2-dimensional, got shape {}".format(cost.shape))
    n_tracks, n_detections = cost.shape
    feasible = np.isfinite(cost)
    if not feasible.any():
        return Assignment.empty(n_tracks, n_detections)
    if (cost[feasible] < 0).any():
        raise ContractViolation("cost matrix has negative entries")
    big = (min(n_tracks, n_detections) + 1) * (cost[feasible].max() + 1.0)
    # dummy rows and columns stand for unmatched tracks and detections
    size = max(n_tracks, n_detections)
    padded = np.zeros((size, size))
    padded[:n_tracks, :n_detections] = np.where(feasible, cost, big)
    pairs = [(r, c) for r, c in enumerate(_lexicographic(padded))
             if r < n_tracks and c < n_detections and feasible[r, c]]
    matched_tracks = {r for r, _ in pairs}
    matched_detections = {c for _, c in pairs}
    return Assignment(pairs,
                      [i for i in range(n_tracks) if i not in matched_tracks],
                      [j for j in range(n_detections) if j not in matched_detections])


def _weights(distances: np.ndarray, z_diff_floor: float, boost_cap: float) -> np.ndarray:
    # per row of `distances`; rows need at least two entries
    ordered = np.sort(distances, axis=1)
    z_diff = ordered[:, 1] - ordered[:, 0]
    return np.maximum(1.0, 1.0 + np.minimum(z_diff - z_diff_floor, boost_cap))


def adaptive_weighting(d_app: np.ndarray, z_diff_floor: float = 0.1, boost_cap: float = 1.0) -> np.ndarray:
    """
    Cheapens discriminative appearance matches.

    For each row (track) and each column (detection) the gap ``z_diff`` between its lowest and
    second-lowest distance gives a weight ``1 + min(z_diff - z_diff_floor, boost_cap)``, at
    least 1. A row's minimum entry is divided by its row weight, or by its column weight when
    that is larger and the entry is also its column's minimum. Other entries are unchanged.
    """
    d_app = np.asarray(d_app, dtype=float)
    n_rows, n_columns = d_app.shape
    result = d_app.copy()
    if n_rows == 0 or n_columns == 0 or (n_rows < 2 and n_columns < 2):
        return result
    row_weight = _weights(d_app, z_diff_floor, boost_cap) if n_columns >= 2 else np.ones(n_rows)
    column_weight = _weights(d_app.T, z_diff_floor, boost_cap) if n_rows >= 2 else np.ones(n_columns)
    column_argmin = np.argmin(d_app, axis=0)
    for i, j in enumerate(np.argmin(d_app, axis=1)):
        weight = row_weight[i]
        if column_argmin[j] == i:
            weight = max(weight, column_weight[j])
        result[i, j] = d_app[i, j] / weight
    return result
