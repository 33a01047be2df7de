"""
Bounding-box state parameterizations and their constant-velocity models.

Three layouts are supported:

* ``sort``: ``[x_c, y_c, s, r, vx, vy, vs]``, area ``s`` and constant aspect ratio ``r``;
* ``wh``: ``[x_c, y_c, w, h, vx, vy, vw, vh]``;
* ``point``: ``[x, vx, y, vy]``, center only.
"""
import enum
import math
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import ContractViolation, DegenerateStateError
from .kalman import LinearModel


class ModelKind(enum.Enum):
    """State parameterization of a track."""
    SORT = 'sort'
    WH = 'wh'
    POINT = 'point'

    @classmethod
    def parse(cls, kind) -> 'ModelKind':
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).lower())
        except ValueError:
            raise ContractViolation("Unknown model kind {}".format(kind))


class BBox(NamedTuple):
    """Axis-aligned box given by its top-left corner and size, in pixels."""
    x: float
    y: float
    w: float
    h: float

    @classmethod
    def from_center(cls, x_c: float, y_c: float, w: float, h: float) -> 'BBox':
        return cls(x_c - w / 2.0, y_c - h / 2.0, w, h)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> 'BBox':
        return cls(x1, y1, x2 - x1, y2 - y1)

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> Tuple[float, float, float, float]:
        return self.x, self.y, self.x + self.w, self.y + self.h

    def is_valid(self) -> bool:
        return self.w > 0 and self.h > 0 and all(math.isfinite(v) for v in self)

    def check(self) -> 'BBox':
        """
        :return: The box itself.
        :raise ContractViolation: if width or height is not positive.
        """
        if not self.is_valid():
            raise ContractViolation("Invalid box {}".format(tuple(self)))
        return self


#: Indices of (x, y) position, (vx, vy) velocity, and the observed components per layout.
_LAYOUT = {
    ModelKind.SORT: dict(dim=7, position=(0, 1), velocity=(4, 5), observed=(0, 1, 2, 3)),
    ModelKind.WH: dict(dim=8, position=(0, 1), velocity=(4, 5), observed=(0, 1, 2, 3)),
    ModelKind.POINT: dict(dim=4, position=(0, 2), velocity=(1, 3), observed=(0, 2)),
}

#: Velocity process noise relative to position process noise.
VELOCITY_NOISE_RATIO = 0.1

#: Noise of the dimensionless aspect ratio relative to q_scale / r_scale.
ASPECT_NOISE_RATIO = 0.01


def state_dim(kind) -> int:
    return _LAYOUT[ModelKind.parse(kind)]['dim']


def position_indices(kind) -> Tuple[int, int]:
    return _LAYOUT[ModelKind.parse(kind)]['position']


def velocity_indices(kind) -> Tuple[int, int]:
    return _LAYOUT[ModelKind.parse(kind)]['velocity']


def _transition(kind: ModelKind, dt: float) -> np.ndarray:
    n = _LAYOUT[kind]['dim']
    F = np.eye(n)
    if kind == ModelKind.SORT:
        # the aspect ratio r (index 3) has no velocity
        for i, j in ((0, 4), (1, 5), (2, 6)):
            F[i, j] = dt
    elif kind == ModelKind.WH:
        for i in range(4):
            F[i, i + 4] = dt
    else:
        F[0, 1] = dt
        F[2, 3] = dt
    return F


def _noise_std(kind: ModelKind, q_scale: float, r_scale: float, area: float) -> (np.ndarray, np.ndarray):
    v = VELOCITY_NOISE_RATIO
    if kind == ModelKind.SORT:
        root = math.sqrt(area)
        q = [q_scale, q_scale, q_scale * root, ASPECT_NOISE_RATIO * q_scale,
             v * q_scale, v * q_scale, v * q_scale * root]
        r = [r_scale, r_scale, r_scale * root, ASPECT_NOISE_RATIO * r_scale]
    elif kind == ModelKind.WH:
        q = [q_scale] * 4 + [v * q_scale] * 4
        r = [r_scale] * 4
    else:
        q = [q_scale, v * q_scale, q_scale, v * q_scale]
        r = [r_scale, r_scale]
    return np.array(q), np.array(r)


def build_model(kind, dt: float = 1.0, q_scale: float = 1.0, r_scale: float = 1.0,
                area: float = 1.0) -> LinearModel:
    """
    Builds the constant-velocity :class:`LinearModel` for a state layout.

    Process noise is diagonal with position standard deviation ``q_scale`` and velocity
    standard deviation ``0.1 * q_scale`` per frame (linear in ``dt``); measurement noise is
    diagonal with standard deviation ``r_scale``. Area terms of the ``sort`` layout are
    scaled by ``sqrt(area)`` to keep units consistent.

    :param kind: ``sort``, ``wh`` or ``point``.
    :param dt: Time step in frames.
    :param q_scale: Process noise scale.
    :param r_scale: Measurement noise scale.
    :param area: Current box area, used by the ``sort`` layout only.
    :raise ContractViolation: on unknown kind or non-positive parameters.
    """
    kind = ModelKind.parse(kind)
    if dt <= 0 or q_scale <= 0 or r_scale <= 0 or area <= 0:
        raise ContractViolation("dt, q_scale, r_scale and area must be positive, got {}, {}, {}, {}".format(
            dt, q_scale, r_scale, area))
    layout = _LAYOUT[kind]
    F = _transition(kind, dt)
    H = np.zeros((len(layout['observed']), layout['dim']))
    for row, column in enumerate(layout['observed']):
        H[row, column] = 1.0
    q_std, r_std = _noise_std(kind, q_scale, r_scale, area)
    return LinearModel(F=F, Q=np.diag(q_std ** 2) * dt, H=H, R=np.diag(r_std ** 2))


def measurement(kind, b: BBox) -> np.ndarray:
    """Observed components of a box for the given layout."""
    kind = ModelKind.parse(kind)
    b.check()
    x_c, y_c = b.center
    if kind == ModelKind.SORT:
        return np.array([x_c, y_c, b.w * b.h, b.w / b.h])
    if kind == ModelKind.WH:
        return np.array([x_c, y_c, b.w, b.h])
    return np.array([x_c, y_c])


def bbox_to_state(kind, b: BBox) -> np.ndarray:
    """
    Converts a box into a state vector with zero velocities.

    :raise ContractViolation: if the box has non-positive width or height.
    """
    kind = ModelKind.parse(kind)
    state = np.zeros(_LAYOUT[kind]['dim'])
    state[list(_LAYOUT[kind]['observed'])] = measurement(kind, b)
    return state


def state_to_bbox(kind, v: np.ndarray, size: Optional[Tuple[float, float]] = None) -> BBox:
    """
    Decodes the observed components of a state vector into a box.

    :param kind: State layout.
    :param v: State vector.
    :param size: Box ``(w, h)``; required for the ``point`` layout which carries no size.
    :raise DegenerateStateError: if the decoded area, aspect ratio, width or height is not positive.
    """
    kind = ModelKind.parse(kind)
    if kind == ModelKind.SORT:
        x_c, y_c, s, r = v[0], v[1], v[2], v[3]
        if not (s > 0 and r > 0):
            raise DegenerateStateError("sort state has area {} and aspect ratio {}".format(s, r))
        w = math.sqrt(s * r)
        return BBox.from_center(x_c, y_c, w, s / w)
    if kind == ModelKind.WH:
        x_c, y_c, w, h = v[0], v[1], v[2], v[3]
        if not (w > 0 and h > 0):
            raise DegenerateStateError("wh state has width {} and height {}".format(w, h))
        return BBox.from_center(x_c, y_c, w, h)
    if size is None:
        raise ContractViolation("point state needs the box size to decode")
    w, h = size
    if not (w > 0 and h > 0):
        raise DegenerateStateError("point state decoded with size {}".format(size))
    return BBox.from_center(v[0], v[2], w, h)


def initial_covariance(kind, b: BBox, q_scale: float = 1.0, r_scale: float = 1.0) -> np.ndarray:
    """
    Covariance of a freshly created track: measurement variance on observed components,
    ``q_scale`` px/frame standard deviation on velocities.
    """
    kind = ModelKind.parse(kind)
    layout = _LAYOUT[kind]
    area = b.check().area
    _, r_std = _noise_std(kind, q_scale, r_scale, area)
    variance = np.full(layout['dim'], q_scale ** 2)
    variance[list(layout['observed'])] = r_std ** 2
    if kind == ModelKind.SORT:
        variance[6] *= area
    return np.diag(variance)
