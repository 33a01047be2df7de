from .errors import (ContractViolation, DegenerateStateError, EstimationError, KftrackError, ParseError,
                     SingularMatrixError, UndefinedMetricError)
from .kalman import GaussianState, LinearModel, predict, update, nsa_update, gating_distance, run_filter
from .motion import BBox, ModelKind, build_model, bbox_to_state, state_to_bbox
from .assoc import Assignment, hungarian, iou, cosine_distance, fuse_bot, ocm_cost, adaptive_weighting
from .cmc import Affine, estimate_affine, compensate_state
from .interp import Tracklet, linear_interpolate, gsi_smooth
from .tracks import Detection, FrameResult, TrackerConfig, TrackerKind, TrackOutput
from .trackers import Tracker, create, step, track_sequence
from .metrics import AmdContext, EvalReport, Trajectory, ade, amd, evaluate, pair_frames
from .sim import CorruptionConfig, CourtConfig, ScenarioKind, corrupt, generate, scenario, simulate
from .engine import Task, Engine
from .runner import cli


__doc__ = "Kftrack is a Kalman-filter multi-object tracking toolkit with a synthetic ball-tracking benchmark."

__all__ = [
    'ContractViolation', 'DegenerateStateError', 'EstimationError', 'KftrackError', 'ParseError',
    'SingularMatrixError', 'UndefinedMetricError',
    'GaussianState', 'LinearModel', 'predict', 'update', 'nsa_update', 'gating_distance', 'run_filter',
    'BBox', 'ModelKind', 'build_model', 'bbox_to_state', 'state_to_bbox',
    'Assignment', 'hungarian', 'iou', 'cosine_distance', 'fuse_bot', 'ocm_cost', 'adaptive_weighting',
    'Affine', 'estimate_affine', 'compensate_state',
    'Tracklet', 'linear_interpolate', 'gsi_smooth',
    'Detection', 'FrameResult', 'TrackerConfig', 'TrackerKind', 'TrackOutput',
    'Tracker', 'create', 'step', 'track_sequence',
    'AmdContext', 'EvalReport', 'Trajectory', 'ade', 'amd', 'evaluate', 'pair_frames',
    'CorruptionConfig', 'CourtConfig', 'ScenarioKind', 'corrupt', 'generate', 'scenario', 'simulate',
    'Task', 'Engine',
    'cli',
]
