"""
Tracks, detections and tracker configuration.
"""
import collections
import enum
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.stats

from .cmc import Affine, compensate_state, warp_box
from .errors import ContractViolation
from .kalman import GaussianState, LinearModel, nsa_update, predict, update
from .motion import BBox, ModelKind, bbox_to_state, build_model, initial_covariance, measurement, state_to_bbox


#: 95% quantile of the chi-square distribution with 4 degrees of freedom.
CHI2_95_4DOF = float(scipy.stats.chi2.ppf(0.95, 4))


class TrackerKind(enum.Enum):
    SORT = 'sort'
    BYTETRACK = 'bytetrack'
    OCSORT = 'ocsort'
    DEEPOCSORT = 'deepocsort'
    BOTSORT = 'botsort'
    STRONGSORT = 'strongsort'

    @classmethod
    def parse(cls, kind) -> 'TrackerKind':
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).lower())
        except ValueError:
            raise ContractViolation("Unknown tracker kind {}".format(kind))


#: Trackers included in ``--tracker all``.
BENCHMARKED = (TrackerKind.DEEPOCSORT, TrackerKind.OCSORT, TrackerKind.STRONGSORT,
               TrackerKind.BOTSORT, TrackerKind.BYTETRACK)


class Stage(enum.Enum):
    TENTATIVE = 'tentative'
    CONFIRMED = 'confirmed'
    LOST = 'lost'
    REMOVED = 'removed'


class Detection(NamedTuple):
    """A detector output: box, confidence and an optional unit-norm appearance embedding."""
    bbox: BBox
    confidence: float
    embedding: Optional[np.ndarray] = None
    frame: int = 0

    def check(self) -> 'Detection':
        self.bbox.check()
        if not 0.0 <= self.confidence <= 1.0:
            raise ContractViolation("detection confidence {} outside [0, 1]".format(self.confidence))
        if self.embedding is not None and abs(np.linalg.norm(self.embedding) - 1.0) > 1e-6:
            raise ContractViolation("detection embedding is not unit-normalized")
        return self


def parse_bool(value: str) -> bool:
    lowered = str(value).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on', 'y'):
        return True
    if lowered in ('0', 'false', 'no', 'off', 'n'):
        return False
    raise ContractViolation("Cannot interpret {} as a boolean".format(value))


class TrackerConfig(NamedTuple):
    """Tracker hyperparameters. Every field can be overridden as ``tracker.<kind>.<field>``."""
    min_hits: int = 3
    max_age: int = 30
    det_threshold: float = 0.5
    byte_high: float = 0.6
    byte_low: float = 0.1
    theta_iou: float = 0.5
    theta_emb: float = 0.25
    lambda_ocm: float = 0.2
    delta_t_ocm: int = 3
    lambda_app: float = 0.5
    ema_alpha: float = 0.9
    da_sigma: float = 0.6
    z_diff_floor: float = 0.1
    boost_cap: float = 1.0
    gating_threshold: float = CHI2_95_4DOF
    use_nsa: bool = False
    use_cmc: bool = False
    use_oru: bool = True
    model_kind: str = 'sort'
    q_scale: float = 4.0
    r_scale: float = 1.0

    @classmethod
    def for_kind(cls, kind) -> 'TrackerConfig':
        """Default configuration of a tracker kind."""
        kind = TrackerKind.parse(kind)
        if kind == TrackerKind.BOTSORT:
            return cls(model_kind='wh')
        if kind == TrackerKind.STRONGSORT:
            return cls(model_kind='wh', use_nsa=True)
        return cls()

    @classmethod
    def from_context(cls, context: Dict[str, Any], kind) -> 'TrackerConfig':
        """
        Builds the configuration of ``kind`` from its defaults, then ``tracker.all.*`` keys,
        then ``tracker.<kind>.*`` keys of the context.

        :raise ContractViolation: on unknown fields or values that do not convert.
        """
        kind = TrackerKind.parse(kind)
        config = cls.for_kind(kind)
        overrides = dict()
        for scope in ('all', kind.value):
            prefix = 'tracker.{}.'.format(scope)
            for key, value in context.items():
                if not key.startswith(prefix):
                    continue
                field = key[len(prefix):]
                if field not in cls._fields:
                    raise ContractViolation("Unknown tracker parameter {}".format(key))
                overrides[field] = value
        converted = dict()
        for field, value in overrides.items():
            default = getattr(config, field)
            try:
                if isinstance(default, bool):
                    converted[field] = value if isinstance(value, bool) else parse_bool(value)
                else:
                    converted[field] = type(default)(value)
            except ValueError:
                raise ContractViolation("Invalid value {} for tracker parameter {}".format(value, field))
        return config._replace(**converted).validate()

    def validate(self) -> 'TrackerConfig':
        if not self.byte_low < self.byte_high:
            raise ContractViolation("byte_low {} must be below byte_high {}".format(self.byte_low, self.byte_high))
        if self.min_hits < 1 or self.max_age < 1:
            raise ContractViolation("min_hits and max_age must be at least 1")
        if self.delta_t_ocm < 1:
            raise ContractViolation("delta_t_ocm must be at least 1")
        if not 0.0 <= self.ema_alpha <= 1.0 or not 0.0 <= self.da_sigma < 1.0:
            raise ContractViolation("ema_alpha must be in [0, 1] and da_sigma in [0, 1)")
        ModelKind.parse(self.model_kind)
        return self


class TrackOutput(NamedTuple):
    track_id: int
    bbox: BBox
    confidence: float


class FrameResult(NamedTuple):
    """Confirmed tracks matched in a frame, with step timing in milliseconds."""
    frame: int
    outputs: List[TrackOutput]
    inference_ms: float
    update_ms: float
    warnings: Tuple[str, ...] = ()


def dynamic_alpha(confidence: float, ema_alpha: float, da_sigma: float) -> float:
    """
    Appearance EMA factor for a detection: ``ema_alpha`` for fully trusted detections,
    rising to 1 (embedding frozen) at confidence ``da_sigma`` and below.
    """
    trust = min(max((confidence - da_sigma) / (1.0 - da_sigma), 0.0), 1.0)
    return ema_alpha + (1.0 - ema_alpha) * (1.0 - trust)


class Track:
    """
    A single object track: Kalman state, lifecycle stage and observation history.

    The track keeps the posterior at its last observation so that it can re-update along a
    virtual trajectory when re-activated after a gap.
    """

    def __init__(self, track_id: int, detection: Detection, frame: int, config: TrackerConfig):
        self.id = track_id
        self.config = config
        self.kind = ModelKind.parse(config.model_kind)
        self.stage = Stage.TENTATIVE if config.min_hits > 1 else Stage.CONFIRMED
        b = detection.bbox
        self.state = GaussianState(bbox_to_state(self.kind, b),
                                   initial_covariance(self.kind, b, config.q_scale, config.r_scale))
        self.hits = 1
        self.age_since_update = 0
        self.last_observation = (frame, b)
        self.observation_history = collections.deque([(frame, b)], maxlen=max(config.delta_t_ocm + 1, 2))
        self.snapshot = self.state
        self.confidence = detection.confidence
        self.appearance = None if detection.embedding is None else np.array(detection.embedding, dtype=float)

    def __repr__(self):
        return 'Track({}, {}, hits={}, age={})'.format(self.id, self.stage.value, self.hits, self.age_since_update)

    @property
    def size(self) -> Tuple[float, float]:
        b = self.last_observation[1]
        return b.w, b.h

    def model(self, area: Optional[float] = None) -> LinearModel:
        if area is None:
            area = self.state.mean[2] if self.kind == ModelKind.SORT and self.state.mean[2] > 0 \
                else self.last_observation[1].area
        return build_model(self.kind, 1.0, self.config.q_scale, self.config.r_scale, area)

    def box(self) -> BBox:
        """
        :raise DegenerateStateError: if the state no longer decodes to a box.
        """
        return state_to_bbox(self.kind, self.state.mean, self.size)

    def predict(self, frames: int = 1):
        for _ in range(frames):
            self.state = predict(self.state, self.model())
            self.age_since_update += 1

    def compensate(self, affine: Affine):
        """Moves the state, the saved posterior and the observations into the current camera frame."""
        self.state = compensate_state(affine, self.state, self.kind)
        self.snapshot = compensate_state(affine, self.snapshot, self.kind)
        frame, b = self.last_observation
        self.last_observation = (frame, warp_box(affine, b))
        self.observation_history = collections.deque(
            ((f, warp_box(affine, o)) for f, o in self.observation_history), maxlen=self.observation_history.maxlen)

    def direction(self, delta_t: int) -> (Optional[np.ndarray], Optional[np.ndarray]):
        """
        Observed motion direction: the unit vector from the observation ``delta_t`` entries back
        in the history to the last observation.

        :return: The anchor center and the direction, or ``(None, None)`` with too few observations.
        """
        history = self.observation_history
        if len(history) < delta_t:
            return None, None
        anchor = np.array(history[max(0, len(history) - 1 - delta_t)][1].center)
        delta = np.array(history[-1][1].center) - anchor
        norm = np.linalg.norm(delta)
        if norm == 0:
            return None, None
        return anchor, delta / norm

    def _filter_update(self, state: GaussianState, b: BBox, confidence: float) -> GaussianState:
        model = self.model(b.area)
        z = measurement(self.kind, b)
        if self.config.use_nsa:
            return nsa_update(state, model, z, confidence)[0]
        return update(state, model, z)[0]

    def _re_update(self, frame: int, b: BBox, confidence: float):
        """Replays predict/update along boxes interpolated between the last and the new observation."""
        last_frame, last_box = self.last_observation
        gap = frame - last_frame
        state = self.snapshot
        for k in range(1, gap):
            ratio = k / gap
            virtual = BBox(*(u + (v - u) * ratio for u, v in zip(last_box, b)))
            state = predict(state, self.model(virtual.area))
            state = self._filter_update(state, virtual, confidence)
        self.state = predict(state, self.model(b.area))

    def update(self, detection: Detection, frame: int, re_update: bool = False):
        """
        Fuses a matched detection and advances the lifecycle.

        :param re_update: Re-update along a virtual trajectory if the track missed frames.
        """
        b = detection.bbox
        if re_update and frame - self.last_observation[0] > 1:
            self._re_update(frame, b, detection.confidence)
        self.state = self._filter_update(self.state, b, detection.confidence)
        self.snapshot = self.state
        self.last_observation = (frame, b)
        self.observation_history.append((frame, b))
        self.confidence = detection.confidence
        self.age_since_update = 0
        self.hits += 1
        if self.stage == Stage.LOST or (self.stage == Stage.TENTATIVE and self.hits >= self.config.min_hits):
            self.stage = Stage.CONFIRMED

    def update_appearance(self, embedding: Optional[np.ndarray], alpha: float):
        if embedding is None:
            return
        if self.appearance is None:
            self.appearance = np.array(embedding, dtype=float)
            return
        mixed = alpha * self.appearance + (1.0 - alpha) * np.asarray(embedding, dtype=float)
        norm = np.linalg.norm(mixed)
        self.appearance = mixed / norm if norm > 0 else np.array(embedding, dtype=float)

    def mark_missed(self):
        if self.stage == Stage.TENTATIVE:
            self.stage = Stage.REMOVED
        elif self.stage == Stage.CONFIRMED:
            self.stage = Stage.LOST
        if self.stage == Stage.LOST and self.age_since_update > self.config.max_age:
            self.stage = Stage.REMOVED

    def mark_removed(self):
        self.stage = Stage.REMOVED
