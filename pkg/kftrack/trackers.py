"""
Tracking-by-detection pipelines.

Every tracker is a stateful object fed one frame at a time through :func:`Tracker.step`. A step
predicts all live tracks, associates them with the frame's detections, updates matched tracks,
ages the others and spawns tentative tracks from leftover detections. The pipelines differ in
their state layout, detection filtering and association costs:

* ``sort``: IoU distance, one Hungarian pass;
* ``bytetrack``: a second IoU pass matching low-confidence detections to tracks alive in the previous frame;
* ``ocsort``: IoU distance plus a motion-direction consistency term, a recovery pass on last
  observations, and re-update along a virtual trajectory when a lost track is re-activated;
* ``deepocsort``: ``ocsort`` with camera motion compensation and adaptively weighted appearance distance;
* ``botsort``: width/height state, minimum of IoU and appearance distance, camera motion compensation;
* ``strongsort``: width/height state, confidence-scaled measurement noise, appearance and IoU
  blended in a single Mahalanobis-gated pass.
"""
import abc
import contextlib
import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple, Type

import numpy as np

from . import assoc
from .cmc import Affine
from .errors import ContractViolation, DegenerateStateError
from .kalman import gating_distances
from .motion import measurement
from .tracks import Detection, FrameResult, Stage, Track, TrackerConfig, TrackerKind, TrackOutput, dynamic_alpha


Pairs = List[Tuple[Track, Detection]]


class Tracker(abc.ABC):
    """
    Base class of the tracking pipelines.

    Subclasses implement :func:`_associate`, returning matched ``(track, detection)`` pairs and
    the detections allowed to start new tracks.
    """
    kind = None
    #: Apply camera motion compensation before prediction rather than after it.
    compensate_before_predict = False
    #: Re-update re-activated tracks along a virtual trajectory.
    re_update = False

    def __init__(self, config: Optional[TrackerConfig] = None, detector_latency_ms: float = 0.0):
        self.config = (config if config is not None else TrackerConfig.for_kind(self.kind)).validate()
        self.detector_latency_ms = detector_latency_ms
        self.tracks = []  # type: List[Track]
        self.frame = 0
        self._next_id = 1
        self._update_seconds = 0.0

    def __repr__(self):
        return '{}(frame={}, tracks={})'.format(type(self).__name__, self.frame, len(self.tracks))

    @contextlib.contextmanager
    def _timed(self):
        start = time.perf_counter()
        try:
            yield
        finally:
            self._update_seconds += time.perf_counter() - start

    def step(self, detections: Sequence[Detection], frame: Optional[int] = None,
             affine: Optional[Affine] = None) -> FrameResult:
        """
        Processes the detections of one frame.

        :param detections: Detections of the frame.
        :param frame: Frame index, defaults to the frame after the previous step. Skipped frames
            count as frames without detections.
        :param affine: Camera motion since the previous step; used only when ``use_cmc`` is set.
        :return: Confirmed tracks matched in this frame, with timing.
        :raise ContractViolation: if frames are not increasing or a detection is invalid.
        """
        start = time.perf_counter()
        frame = self.frame + 1 if frame is None else frame
        if frame <= self.frame:
            raise ContractViolation("frame {} does not follow frame {}".format(frame, self.frame))
        detections = [d.check() for d in detections]
        self._check_input(detections)
        elapsed = frame - self.frame if self.frame > 0 else 1
        self.frame = frame
        self._update_seconds = 0.0
        warnings = []

        compensate = affine is not None and self.config.use_cmc
        if compensate and self.compensate_before_predict:
            self._compensate(affine)
        self._predict(elapsed)
        if compensate and not self.compensate_before_predict:
            self._compensate(affine)

        with self._timed():
            pairs, spawn = self._associate(frame, detections, warnings)
            matched = set()
            for track, detection in pairs:
                self._apply(track, detection, frame)
                matched.add(track.id)
        for track in self.tracks:
            if track.id not in matched:
                track.mark_missed()
        for detection in spawn:
            self._spawn(detection, frame)
            matched.add(self._next_id - 1)

        outputs = []
        for track in self.tracks:
            if track.id not in matched or track.stage != Stage.CONFIRMED:
                continue
            try:
                outputs.append(TrackOutput(track.id, track.box(), track.confidence))
            except DegenerateStateError:
                logging.getLogger(__name__).debug("Dropping degenerate track {}".format(track.id))
                track.mark_removed()
        self.tracks = [t for t in self.tracks if t.stage != Stage.REMOVED]

        total = (time.perf_counter() - start) * 1000.0
        update_ms = min(self._update_seconds * 1000.0, total)
        return FrameResult(frame, outputs, total + self.detector_latency_ms, update_ms, tuple(warnings))

    def _check_input(self, detections: List[Detection]):
        pass

    def _compensate(self, affine: Affine):
        for track in self.tracks:
            track.compensate(affine)

    def _predict(self, frames: int):
        for track in self.tracks:
            track.predict(frames)
            try:
                track.box()
            except DegenerateStateError:
                logging.getLogger(__name__).debug("Dropping track {} with degenerate prediction".format(track.id))
                track.mark_removed()
        self.tracks = [t for t in self.tracks if t.stage != Stage.REMOVED]

    def _apply(self, track: Track, detection: Detection, frame: int):
        track.update(detection, frame, re_update=self.re_update and self.config.use_oru)

    def _spawn(self, detection: Detection, frame: int):
        self.tracks.append(Track(self._next_id, detection, frame, self.config))
        self._next_id += 1

    @abc.abstractmethod
    def _associate(self, frame: int, detections: List[Detection], warnings: List[str]) -> (Pairs, List[Detection]):
        pass

    def _iou_cost(self, tracks: List[Track], detections: List[Detection], last_observation: bool = False) -> np.ndarray:
        """IoU distance, infeasible where ``1 - IoU`` is not below ``theta_iou``."""
        boxes = [t.last_observation[1] for t in tracks] if last_observation else [t.box() for t in tracks]
        cost = 1.0 - assoc.iou_matrix(boxes, [d.bbox for d in detections])
        cost[cost >= self.config.theta_iou] = assoc.SENTINEL
        return cost

    @staticmethod
    def _match(cost: np.ndarray, tracks: List[Track], detections: List[Detection]) -> (Pairs, List[Track],
                                                                                       List[Detection]):
        if not tracks or not detections:
            return [], list(tracks), list(detections)
        assignment = assoc.hungarian(cost)
        return ([(tracks[i], detections[j]) for i, j in assignment.pairs],
                [tracks[i] for i in assignment.unmatched_tracks],
                [detections[j] for j in assignment.unmatched_detections])


class SortTracker(Tracker):
    kind = TrackerKind.SORT

    def _associate(self, frame, detections, warnings):
        detections = [d for d in detections if d.confidence >= self.config.det_threshold]
        pairs, _, unmatched = self._match(self._iou_cost(self.tracks, detections), self.tracks, detections)
        return pairs, unmatched


class ByteTracker(Tracker):
    """Two-stage association: high-confidence detections first, then low-confidence ones."""
    kind = TrackerKind.BYTETRACK

    def _first_stage_cost(self, tracks: List[Track], detections: List[Detection], warnings: List[str]) -> np.ndarray:
        return self._iou_cost(tracks, detections)

    def _associate(self, frame, detections, warnings):
        high = [d for d in detections if d.confidence >= self.config.byte_high]
        low = [d for d in detections if self.config.byte_low <= d.confidence < self.config.byte_high]
        pairs, remaining, unmatched_high = self._match(
            self._first_stage_cost(self.tracks, high, warnings), self.tracks, high)
        # low-confidence detections only continue tracks that were alive in the previous frame
        alive = [t for t in remaining if t.stage == Stage.CONFIRMED]
        low_pairs, _, _ = self._match(self._iou_cost(alive, low), alive, low)
        return pairs + low_pairs, unmatched_high


class OcSortTracker(Tracker):
    """IoU plus motion-direction consistency, recovery on last observations, and re-update."""
    kind = TrackerKind.OCSORT
    re_update = True

    def _appearance_cost(self, tracks: List[Track], detections: List[Detection],
                         warnings: List[str]) -> Optional[np.ndarray]:
        return None

    def _direction_cost(self, tracks: List[Track], detections: List[Detection]) -> np.ndarray:
        anchors, directions = zip(*(t.direction(self.config.delta_t_ocm) for t in tracks))
        centers = np.array([d.bbox.center for d in detections]).reshape(-1, 2)
        return assoc.ocm_cost_matrix(anchors, directions, centers, self.config.lambda_ocm)

    def _associate(self, frame, detections, warnings):
        detections = [d for d in detections if d.confidence >= self.config.det_threshold]
        tracks = self.tracks
        if tracks and detections:
            cost = self._iou_cost(tracks, detections) + self._direction_cost(tracks, detections)
            appearance = self._appearance_cost(tracks, detections, warnings)
            if appearance is not None:
                cost = cost + appearance
        else:
            cost = np.zeros((len(tracks), len(detections)))
        pairs, remaining, unmatched = self._match(cost, tracks, detections)
        recovered, _, unmatched = self._match(
            self._iou_cost(remaining, unmatched, last_observation=True), remaining, unmatched)
        return pairs + recovered, unmatched


def _embeddings_available(tracks: List[Track], detections: List[Detection]) -> bool:
    return all(d.embedding is not None for d in detections) and all(t.appearance is not None for t in tracks)


class DeepOcSortTracker(OcSortTracker):
    """OC-SORT with appearance: confidence-dependent embedding EMA and adaptively weighted cosine distance."""
    kind = TrackerKind.DEEPOCSORT
    compensate_before_predict = True

    def _appearance_cost(self, tracks, detections, warnings):
        if any(d.embedding is None for d in detections):
            warnings.append('missing_embeddings')
            return None
        if not _embeddings_available(tracks, detections):
            return None
        d_cos = assoc.cosine_distance_matrix(np.array([t.appearance for t in tracks]),
                                             np.array([d.embedding for d in detections]))
        return self.config.lambda_app * assoc.adaptive_weighting(d_cos, self.config.z_diff_floor,
                                                                 self.config.boost_cap)

    def _apply(self, track, detection, frame):
        super()._apply(track, detection, frame)
        track.update_appearance(detection.embedding,
                                dynamic_alpha(detection.confidence, self.config.ema_alpha, self.config.da_sigma))


class BotSortTracker(ByteTracker):
    """BYTE association on the width/height state, fusing IoU and appearance in the first stage."""
    kind = TrackerKind.BOTSORT

    def _first_stage_cost(self, tracks, detections, warnings):
        d_iou = self._iou_cost(tracks, detections)
        if not tracks or not detections or not _embeddings_available(tracks, detections):
            return d_iou
        d_cos = assoc.cosine_distance_matrix(np.array([t.appearance for t in tracks]),
                                             np.array([d.embedding for d in detections]))
        return assoc.fuse_bot(1.0 - assoc.iou_matrix([t.box() for t in tracks], [d.bbox for d in detections]),
                              d_cos, self.config.theta_iou, self.config.theta_emb)

    def _apply(self, track, detection, frame):
        super()._apply(track, detection, frame)
        track.update_appearance(detection.embedding, self.config.ema_alpha)


class StrongSortTracker(Tracker):
    """Single global assignment on blended appearance and IoU distance, gated by Mahalanobis distance."""
    kind = TrackerKind.STRONGSORT

    def _check_input(self, detections):
        if any(d.embedding is None for d in detections):
            raise ContractViolation("strongsort needs an appearance embedding for every detection")

    def _associate(self, frame, detections, warnings):
        detections = [d for d in detections if d.confidence >= self.config.det_threshold]
        tracks = self.tracks
        if not tracks or not detections:
            return [], detections
        d_iou = 1.0 - assoc.iou_matrix([t.box() for t in tracks], [d.bbox for d in detections])
        d_cos = assoc.cosine_distance_matrix(np.array([t.appearance for t in tracks]),
                                             np.array([d.embedding for d in detections]))
        lam = self.config.lambda_app
        cost = lam * d_cos + (1.0 - lam) * d_iou
        for i, track in enumerate(tracks):
            zs = np.array([measurement(track.kind, d.bbox) for d in detections])
            # gating uses the unscaled measurement noise
            distances = gating_distances(track.state, track.model(), zs)
            cost[i, distances > self.config.gating_threshold] = assoc.SENTINEL
        cost[d_cos > self.config.theta_emb] = assoc.SENTINEL
        pairs, _, unmatched = self._match(cost, tracks, detections)
        return pairs, unmatched

    def _apply(self, track, detection, frame):
        super()._apply(track, detection, frame)
        track.update_appearance(detection.embedding, self.config.ema_alpha)


TRACKERS = {
    TrackerKind.SORT: SortTracker,
    TrackerKind.BYTETRACK: ByteTracker,
    TrackerKind.OCSORT: OcSortTracker,
    TrackerKind.DEEPOCSORT: DeepOcSortTracker,
    TrackerKind.BOTSORT: BotSortTracker,
    TrackerKind.STRONGSORT: StrongSortTracker,
}  # type: Dict[TrackerKind, Type[Tracker]]


def create(kind, config: Optional[TrackerConfig] = None, detector_latency_ms: float = 0.0) -> Tracker:
    """
    Instantiates a tracker.

    :raise ContractViolation: on unknown kind.
    """
    kind = TrackerKind.parse(kind)
    return TRACKERS[kind](config, detector_latency_ms)


def step(tracker: Tracker, detections: Sequence[Detection], frame: Optional[int] = None,
         affine: Optional[Affine] = None) -> FrameResult:
    """Advances any tracker by one frame."""
    return tracker.step(detections, frame, affine)


def track_sequence(tracker: Tracker, detections_by_frame: Dict[int, List[Detection]], last_frame: int,
                   affines: Optional[Dict[int, Affine]] = None, first_frame: int = 1) -> List[FrameResult]:
    """
    Runs a tracker over every frame from ``first_frame`` to ``last_frame``; frames missing from
    ``detections_by_frame`` have no detections.
    """
    affines = affines or dict()
    return [tracker.step(detections_by_frame.get(frame, []), frame, affines.get(frame))
            for frame in range(first_frame, last_frame + 1)]
