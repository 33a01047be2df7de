"""
Synthetic racquetball court: ball physics, detector corruption and benchmark scenarios.

Frames are numbered from 1. Positions are ball centers in pixels with y pointing down, so
positive gravity pulls the ball towards the floor at ``y = height``.
"""
import enum
import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .cmc import Affine, estimate_affine, synthesize_correspondences
from .errors import ContractViolation, EstimationError
from .metrics import Trajectory
from .motion import BBox
from .tracks import Detection


class CourtConfig(NamedTuple):
    """Court geometry, physics constants and the ball's initial state."""
    width: float = 640.0
    height: float = 480.0
    gravity: float = 0.0
    restitution: float = 1.0
    ball_radius: float = 10.0
    x0: float = 320.0
    y0: float = 240.0
    vx0: float = 0.0
    vy0: float = 0.0
    frame_count: int = 100
    dt: float = 1.0

    def check(self) -> 'CourtConfig':
        r = self.ball_radius
        if not 0.0 < self.restitution <= 1.0:
            raise ContractViolation("restitution {} outside (0, 1]".format(self.restitution))
        if r <= 0 or 2 * r >= min(self.width, self.height):
            raise ContractViolation("ball radius {} does not fit the court".format(r))
        if not (r <= self.x0 <= self.width - r and r <= self.y0 <= self.height - r):
            raise ContractViolation("ball starts outside the court at ({}, {})".format(self.x0, self.y0))
        if self.frame_count < 1 or self.dt <= 0:
            raise ContractViolation("frame_count and dt must be positive")
        return self


class CorruptionConfig(NamedTuple):
    """
    Detector failure model. Speeds are in px/frame; probabilities are clamped to [0, 1].

    ``camera_pan`` holds the camera translation of every frame (index 0 is frame 1, whose motion
    is ignored). With ``keypoints`` above zero, each frame's affine is estimated from that many
    synthetic keypoint correspondences instead of being emitted exactly.
    """
    pos_noise_px: float = 0.0
    miss_base: float = 0.0
    miss_speed_gain: float = 0.0
    fp_rate: float = 0.0
    conf_base: float = 0.9
    conf_speed_penalty: float = 0.0
    confidence_noise: float = 0.0
    occlusion_windows: Tuple[Tuple[int, int], ...] = ()
    camera_pan: Optional[Tuple[Tuple[float, float], ...]] = None
    confidence_dips: Tuple[Tuple[int, int], ...] = ()
    dip_confidence: float = 0.3
    fp_confidence: Tuple[float, float] = (0.1, 0.6)
    embedding_dim: int = 16
    embedding_noise: float = 0.0
    keypoints: int = 0
    keypoint_noise_px: float = 0.0
    keypoint_outliers: float = 0.0


class SimResult(NamedTuple):
    """Ball centers per frame, velocity per frame and ``(frame, axis)`` wall bounces."""
    trajectory: Trajectory
    velocities: np.ndarray
    bounces: List[Tuple[int, str]]


class CorruptionResult(NamedTuple):
    """Detections and camera affines per frame, and the true boxes in image coordinates."""
    detections: Dict[int, List[Detection]]
    affines: Dict[int, Affine]
    truth: Dict[int, BBox]


class ScenarioKind(enum.Enum):
    RALLY = 'rally'
    OCCLUSION = 'occlusion'
    CONF_DIP = 'conf_dip'
    CAMERA_PAN = 'camera_pan'
    CROSSING = 'crossing'

    @classmethod
    def parse(cls, kind) -> 'ScenarioKind':
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).lower())
        except ValueError:
            raise ContractViolation("Unknown scenario kind {}".format(kind))


#: Scenarios of the benchmark matrix.
ALL_ARCHETYPES = (ScenarioKind.RALLY, ScenarioKind.OCCLUSION, ScenarioKind.CONF_DIP, ScenarioKind.CAMERA_PAN)


class Scenario(NamedTuple):
    """A generated scenario: true boxes per object id, detections and affines per frame."""
    kind: ScenarioKind
    seed: int
    frame_count: int
    truth: Dict[int, Dict[int, BBox]]
    detections: Dict[int, List[Detection]]
    affines: Dict[int, Affine]


def _advance(p: float, v: float, low: float, high: float, restitution: float) -> (float, float, bool):
    """Moves one coordinate by ``v`` reflecting off the walls within the step."""
    p += v
    bounced = False
    while p > high or p < low:
        bounced = True
        if p > high:
            p = high - restitution * (p - high)
        else:
            p = low + restitution * (low - p)
        v = -restitution * v
    return p, v, bounced


def simulate(c: CourtConfig) -> SimResult:
    """
    Integrates the ball with gravity and wall reflections. Frame 1 is the initial state.

    Each frame the velocity gains ``gravity * dt`` and the position moves by ``v * dt``; a wall
    crossing within the step reflects the remaining path scaled by the restitution, so the
    ball always stays within ``[radius, size - radius]``.
    """
    c.check()
    r = c.ball_radius
    limits = ((r, c.width - r), (r, c.height - r))
    p = [float(c.x0), float(c.y0)]
    v = [float(c.vx0), float(c.vy0)]
    points = [(1, (p[0], p[1]))]
    velocities = [tuple(v)]
    bounces = []
    for frame in range(2, c.frame_count + 1):
        v[1] += c.gravity * c.dt
        for axis, name in enumerate('xy'):
            low, high = limits[axis]
            position, velocity, bounced = _advance(p[axis], v[axis] * c.dt, low, high, c.restitution)
            p[axis], v[axis] = position, velocity / c.dt
            if bounced:
                bounces.append((frame, name))
        points.append((frame, (p[0], p[1])))
        velocities.append(tuple(v))
    return SimResult(Trajectory(points), np.array(velocities), bounces)


def _in_windows(frame: int, windows: Sequence[Tuple[int, int]]) -> bool:
    return any(start <= frame <= end for start, end in windows)


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def _camera(k: CorruptionConfig, frame_count: int, rng: np.random.Generator,
            image_size: Tuple[float, float]) -> (Dict[int, Affine], Dict[int, np.ndarray]):
    """Per-frame affines and the cumulative image offset of each frame."""
    affines, offsets = dict(), dict()
    offset = np.zeros(2)
    for frame in range(1, frame_count + 1):
        pan = (0.0, 0.0)
        if k.camera_pan is not None and frame > 1 and frame - 1 < len(k.camera_pan):
            pan = k.camera_pan[frame - 1]
        exact = Affine.translation(*pan)
        offset = offset + np.asarray(pan, dtype=float)
        offsets[frame] = offset
        if k.camera_pan is None:
            continue
        if frame == 1:
            affines[frame] = Affine.identity()
        elif k.keypoints > 0:
            pairs = synthesize_correspondences(exact, k.keypoints, rng, image_size[0], image_size[1],
                                               k.keypoint_noise_px, k.keypoint_outliers)
            try:
                affines[frame], _ = estimate_affine(pairs, seed=int(rng.integers(2 ** 31)))
            except EstimationError as e:
                logging.getLogger(__name__).warning("Frame {}: {}, assuming a static camera".format(frame, e))
                affines[frame] = Affine.identity()
        else:
            affines[frame] = exact
    return affines, offsets


def _corrupt_objects(objects: Dict[int, Tuple[Trajectory, np.ndarray]], k: CorruptionConfig, seed: int,
                     radius: float, image_size: Tuple[float, float]) -> (Dict[int, List[Detection]],
                                                                         Dict[int, Affine],
                                                                         Dict[int, Dict[int, BBox]]):
    rng = np.random.default_rng(seed)
    frames = sorted({f for trajectory, _ in objects.values() for f in trajectory.frames})
    frame_count = frames[-1] if frames else 0
    affines, offsets = _camera(k, frame_count, rng, image_size)
    bases = {i: _unit(rng.normal(size=k.embedding_dim)) for i in sorted(objects)} if k.embedding_dim > 0 else {}
    diameter = 2.0 * radius
    detections = {f: [] for f in range(1, frame_count + 1)}
    truth = {i: dict() for i in objects}

    def embed(base: Optional[np.ndarray], confidence: float) -> Optional[np.ndarray]:
        if k.embedding_dim <= 0:
            return None
        if base is None:
            return _unit(rng.normal(size=k.embedding_dim))
        noise = rng.normal(size=k.embedding_dim) * (1.0 - confidence) * k.embedding_noise
        return _unit(base + noise)

    states = {i: {f: (p, float(np.linalg.norm(v))) for (f, p), v in zip(trajectory.points, velocities)}
              for i, (trajectory, velocities) in objects.items()}
    for frame in range(1, frame_count + 1):
        offset = offsets[frame]
        for i in sorted(objects):
            if frame not in states[i]:
                continue
            position, speed = states[i][frame]
            center = np.asarray(position, dtype=float) + offset
            truth[i][frame] = BBox.from_center(center[0], center[1], diameter, diameter)
            miss = rng.random() < min(max(k.miss_base + k.miss_speed_gain * speed, 0.0), 1.0)
            noise = rng.normal(0.0, 1.0, size=2) * k.pos_noise_px
            confidence = k.conf_base - k.conf_speed_penalty * speed + k.confidence_noise * rng.normal()
            confidence = min(max(confidence, 0.0), 1.0)
            if _in_windows(frame, k.confidence_dips):
                confidence = k.dip_confidence
            if miss or _in_windows(frame, k.occlusion_windows):
                continue
            x, y = center + noise
            detections[frame].append(Detection(BBox.from_center(x, y, diameter, diameter), confidence,
                                               embed(bases.get(i), confidence), frame))
        for _ in range(rng.poisson(k.fp_rate) if k.fp_rate > 0 else 0):
            x = rng.uniform(radius, image_size[0] - radius) + offset[0]
            y = rng.uniform(radius, image_size[1] - radius) + offset[1]
            confidence = rng.uniform(*k.fp_confidence)
            detections[frame].append(Detection(BBox.from_center(x, y, diameter, diameter), confidence,
                                               embed(None, confidence), frame))
    return detections, affines, truth


def corrupt(truth: Trajectory, velocities: np.ndarray, k: CorruptionConfig, seed: int, radius: float = 10.0,
            image_size: Tuple[float, float] = (640.0, 480.0)) -> CorruptionResult:
    """
    Turns a true trajectory into a detection stream.

    Per frame a detection is missed with probability ``miss_base + miss_speed_gain * speed`` or
    inside an occlusion window; otherwise a ball-sized box is emitted at the noisy center with
    confidence ``conf_base - conf_speed_penalty * speed`` plus noise (``dip_confidence`` inside
    dip windows). Poisson false positives with low confidence are scattered over the image.
    With a camera pan every position is shifted by the cumulative camera translation.
    """
    detections, affines, boxes = _corrupt_objects({1: (truth, velocities)}, k, seed, radius, image_size)
    return CorruptionResult(detections, affines, boxes[1])


def scenario(kind, seed: int) -> (CourtConfig, CorruptionConfig):
    """
    Configuration of a benchmark scenario:

    * ``rally``: multi-bounce rally in a small court with mild detector noise;
    * ``occlusion``: larger, faster-falling ball hidden for 10 frames mid-flight;
    * ``conf_dip``: noiseless rally whose detection confidence dips below the high threshold;
    * ``camera_pan``: rally filmed by a drifting, shaking camera;
    * ``crossing``: two balls meeting head-on and bouncing back.
    """
    kind = ScenarioKind.parse(kind)
    rng = np.random.default_rng(seed)
    if kind == ScenarioKind.CROSSING:
        return (CourtConfig(width=640.0, height=480.0, ball_radius=15.0, frame_count=160),
                CorruptionConfig(embedding_noise=0.5))
    if kind == ScenarioKind.OCCLUSION:
        court = CourtConfig(width=640.0, height=480.0, gravity=0.15, restitution=0.9, ball_radius=20.0,
                            x0=rng.uniform(80.0, 200.0), y0=rng.uniform(80.0, 200.0),
                            vx0=rng.uniform(3.5, 4.5), vy0=rng.uniform(-2.0, 2.0), frame_count=200)
        return court, CorruptionConfig(pos_noise_px=0.5, occlusion_windows=(_quiet_window(court, 10, 40),),
                                       embedding_noise=0.5)
    court = CourtConfig(width=256.0, height=192.0, gravity=0.01, restitution=0.97, ball_radius=15.0,
                        x0=rng.uniform(50.0, 206.0), y0=rng.uniform(40.0, 96.0),
                        vx0=rng.choice((-1.0, 1.0)) * rng.uniform(3.2, 3.8),
                        vy0=rng.choice((-1.0, 1.0)) * rng.uniform(2.2, 2.8), frame_count=300)
    if kind == ScenarioKind.RALLY:
        return court, CorruptionConfig(pos_noise_px=1.0, miss_base=0.02, miss_speed_gain=0.005, fp_rate=0.05,
                                       conf_speed_penalty=0.02, confidence_noise=0.03, embedding_noise=0.5)
    if kind == ScenarioKind.CONF_DIP:
        starts = sorted(rng.choice(np.arange(20, 280, 20), size=3, replace=False))
        dips = tuple((int(s), int(s) + int(rng.integers(2, 5))) for s in starts)
        return court, CorruptionConfig(confidence_dips=dips, embedding_noise=0.5)
    shake = rng.uniform(-8.0, 8.0, size=(court.frame_count, 2))
    pan = tuple((5.0 + dx, dy) for dx, dy in shake)
    return court, CorruptionConfig(pos_noise_px=0.5, camera_pan=pan, keypoints=60, keypoint_noise_px=0.2,
                                   keypoint_outliers=0.2, embedding_noise=0.5)


def _quiet_window(court: CourtConfig, length: int, earliest: int) -> Tuple[int, int]:
    """First window of ``length`` frames, from frame ``earliest`` on, with no wall bounce inside or just after it."""
    bounce_frames = {f for f, _ in simulate(court).bounces}
    for start in range(earliest, court.frame_count - length - 5):
        if not any(f in bounce_frames for f in range(start - 3, start + length + 3)):
            return start, start + length - 1
    return earliest, earliest + length - 1


def crossing(seed: int, court: Optional[CourtConfig] = None) -> Dict[int, SimResult]:
    """
    Two balls on the same horizontal line, starting a quarter court width either side of the
    centre and moving towards each other at the same speed, 1.6 to 2.5 px/frame. They meet at the
    centre between frames 60 and 100, then both reverse and travel back, each along the path the
    other one came in on.
    """
    court = court or scenario(ScenarioKind.CROSSING, seed)[0]
    rng = np.random.default_rng(seed)
    y = court.height / 2.0
    x = [court.width * 0.25, court.width * 0.75]
    speed = rng.uniform(1.6, 2.5)
    v = [speed, -speed]
    points = {1: [(1, (x[0], y))], 2: [(1, (x[1], y))]}
    velocities = {1: [(v[0], 0.0)], 2: [(v[1], 0.0)]}
    bounces = []
    met = False
    for frame in range(2, court.frame_count + 1):
        x = [x[0] + v[0], x[1] + v[1]]
        if not met and x[1] - x[0] <= speed:
            met = True
            v = [-v[0], -v[1]]
            bounces.append((frame, 'x'))
        points[1].append((frame, (x[0], y)))
        points[2].append((frame, (x[1], y)))
        velocities[1].append((v[0], 0.0))
        velocities[2].append((v[1], 0.0))
    return {i: SimResult(Trajectory(points[i]), np.array(velocities[i]), bounces) for i in (1, 2)}


def generate(kind, seed: int) -> Scenario:
    """Simulates and corrupts a scenario in one go."""
    kind = ScenarioKind.parse(kind)
    court, corruption = scenario(kind, seed)
    if kind == ScenarioKind.CROSSING:
        results = crossing(seed, court)
    else:
        results = {1: simulate(court)}
    objects = {i: (r.trajectory, r.velocities) for i, r in results.items()}
    detections, affines, truth = _corrupt_objects(objects, corruption, seed, court.ball_radius,
                                                  (court.width, court.height))
    logging.getLogger(__name__).debug("Scenario {} seed {}: {} frames, {} detections".format(
        kind.value, seed, court.frame_count, sum(len(d) for d in detections.values())))
    return Scenario(kind, seed, court.frame_count, truth, detections, affines)
