"""
File formats of a tracking run, result post-processing and the benchmark matrix.

Detections, ground truth and tracker results use the MOT text convention
``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`` with 1-based frames. Every reader and
writer accepts either a path or a :class:`~kftrack.file.DataFile` handed over by the engine.
"""
import collections
import concurrent.futures
import csv
import functools
import logging
import os
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .cmc import Affine
from .engine import Engine
from .errors import ContractViolation, KftrackError, ParseError
from .file import CSVInputDataFile, CSVOutputDataFile, DataFile, TextDialect
from .interp import Tracklet, gsi_smooth, linear_interpolate
from .metrics import EvalReport, MatchResult
from .motion import BBox
from .sim import ALL_ARCHETYPES, ScenarioKind
from .tracks import BENCHMARKED, Detection, FrameResult, TrackerKind, TrackOutput


TRUTH = 1000
DETECTIONS = 1100
EMBEDDINGS = 1110
AFFINES = 1200
RESULTS = 2000
TIMING = 2100
FINAL = 2200
TRAJECTORY = 3000
REPORT = 3100

INTERPOLATION_MODES = ('none', 'linear', 'gsi')

FLOAT_FORMAT = '%.6f'

SUMMARY_COLUMNS = ['tracker', 'scenario', 'seed', 'ade', 'amd', 'coverage', 'n_pairs']
TIMING_COLUMNS = ['tracker', 'scenario', 'seed', 'mean_inference_ms', 'mean_update_ms']

Source = Union[str, DataFile]


@functools.lru_cache(maxsize=None)
def default_engine() -> Engine:
    """Engine reading the packaged pipeline definition."""
    return Engine.default()


def _data_file(source: Source, code: int, mode: str) -> DataFile:
    if isinstance(source, DataFile):
        return source
    spec = default_engine().specs[code]
    if not spec.is_csv():
        return DataFile(source, mode + 't', spec)
    if mode == 'r':
        return CSVInputDataFile(source, 'rt', spec)
    return CSVOutputDataFile(source, 'wt', spec)


def _mot_rows(source: Source, code: int) -> List[Tuple[int, Dict[str, Any], BBox]]:
    data_file = _data_file(source, code, 'r')
    rows = []
    for line_number, record in data_file.iterate_records(numbered=True):
        if record['frame'] < 1:
            raise ParseError(data_file.get_path(), line_number, 'frame {} is not positive'.format(record['frame']))
        box = BBox(record['bb_left'], record['bb_top'], record['bb_width'], record['bb_height'])
        if not box.is_valid():
            raise ParseError(data_file.get_path(), line_number, 'invalid box {}'.format(tuple(box)))
        rows.append((line_number, record, box))
    return rows


def _write_mot(destination: Source, code: int, rows: List[list]):
    data_file = _data_file(destination, code, 'w')
    rows = sorted(rows, key=lambda row: (row[0], row[1]))
    data_file.write_data_frame(pd.DataFrame(rows, columns=data_file.spec.columns()), float_format=FLOAT_FORMAT)


def read_embeddings(source: Source) -> Dict[Tuple[int, int], np.ndarray]:
    """
    Reads ``frame,index,e0..e{d-1}`` rows, keyed by ``(frame, index)``; vectors are normalized.

    :raise ParseError: on malformed rows, zero vectors or inconsistent dimension.
    """
    data_file = _data_file(source, EMBEDDINGS, 'r')
    vectors, dimension = dict(), None
    with data_file.open() as f:
        for line_number, row in enumerate(csv.reader(f, dialect=TextDialect), start=1):
            if not row or not ''.join(row).strip():
                continue
            try:
                frame, index = int(row[0]), int(row[1])
                vector = np.array(row[2:], dtype=float)
            except (ValueError, IndexError) as e:
                raise ParseError(data_file.get_path(), line_number, str(e))
            dimension = dimension or len(vector)
            if len(vector) == 0 or len(vector) != dimension:
                raise ParseError(data_file.get_path(), line_number,
                                 'expected {} embedding values, got {}'.format(dimension, len(vector)))
            norm = np.linalg.norm(vector)
            if not np.isfinite(norm) or norm == 0.0:
                raise ParseError(data_file.get_path(), line_number, 'embedding is zero or not finite')
            vectors[(frame, index)] = vector / norm
    return vectors


def write_embeddings(destination: Source, detections: Dict[int, List[Detection]]) -> int:
    """Writes the embedding of every detection that has one; returns the number of rows."""
    data_file = _data_file(destination, EMBEDDINGS, 'w')
    count = 0
    with data_file.open() as f:
        writer = csv.writer(f, dialect=TextDialect)
        for frame in sorted(detections):
            for index, detection in enumerate(detections[frame]):
                if detection.embedding is None:
                    continue
                writer.writerow([frame, index] + [repr(float(x)) for x in detection.embedding])
                count += 1
    return count


def ingest_detections(source: Source, embeddings: Optional[Source] = None) -> Dict[int, List[Detection]]:
    """
    Reads a MOT detection file into per-frame detection lists, sorted by frame. The id and
    world-coordinate columns are ignored. Detections are indexed from 0 within their frame in
    file order; that index attaches the optional sidecar embeddings.

    :raise ParseError: on a malformed line, with its line number.
    """
    log = logging.getLogger(__name__)
    vectors = read_embeddings(embeddings) if embeddings is not None else dict()
    path = _data_file(source, DETECTIONS, 'r').get_path()
    grouped = collections.defaultdict(list)
    for line_number, record, box in _mot_rows(source, DETECTIONS):
        grouped[record['frame']].append((line_number, record, box))
    detections = dict()
    for frame in sorted(grouped):
        detections[frame] = []
        for index, (line_number, record, box) in enumerate(grouped[frame]):
            try:
                detection = Detection(box, record['conf'], vectors.pop((frame, index), None), frame).check()
            except ContractViolation as e:
                raise ParseError(path, line_number, str(e))
            detections[frame].append(detection)
    if vectors:
        log.warning("{} embeddings do not belong to any detection of {}".format(len(vectors), path))
    log.debug("Read {} detections in {} frames from {}".format(
        sum(map(len, detections.values())), len(detections), path))
    return detections


def write_detections(destination: Source, detections: Dict[int, List[Detection]]):
    rows = [[frame, -1, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.confidence, -1, -1, -1]
            for frame in sorted(detections) for d in detections[frame]]
    # keep file order within a frame, it carries the embedding index
    data_file = _data_file(destination, DETECTIONS, 'w')
    data_file.write_data_frame(pd.DataFrame(rows, columns=data_file.spec.columns()), float_format=FLOAT_FORMAT)


def read_truth(source: Source) -> Dict[int, Dict[int, BBox]]:
    """Ground-truth boxes by target id and frame."""
    truth = collections.defaultdict(dict)
    path = _data_file(source, TRUTH, 'r').get_path()
    for line_number, record, box in _mot_rows(source, TRUTH):
        if record['frame'] in truth[record['id']]:
            raise ParseError(path, line_number, 'duplicate frame {} of target {}'.format(record['frame'], record['id']))
        truth[record['id']][record['frame']] = box
    return dict(truth)


def write_truth(destination: Source, truth: Dict[int, Dict[int, BBox]]):
    _write_mot(destination, TRUTH, [[frame, target] + list(box) + [1.0, -1, -1, -1]
                                    for target, boxes in truth.items() for frame, box in boxes.items()])


def read_results(source: Source) -> Dict[int, List[TrackOutput]]:
    """Tracker outputs by frame, sorted by track id within a frame."""
    results = collections.defaultdict(list)
    for _, record, box in _mot_rows(source, RESULTS):
        results[record['frame']].append(TrackOutput(record['id'], box, record['conf']))
    return {frame: sorted(results[frame], key=lambda o: o.track_id) for frame in sorted(results)}


def write_results(destination: Source, results: Dict[int, List[TrackOutput]]):
    _write_mot(destination, RESULTS, [[frame, o.track_id] + list(o.bbox) + [o.confidence, -1, -1, -1]
                                      for frame, outputs in results.items() for o in outputs])


def read_affines(source: Source) -> Dict[int, Affine]:
    """Reads ``frame m00 m01 m10 m11 t0 t1`` rows."""
    data_file = _data_file(source, AFFINES, 'r')
    return {record['frame']: Affine.from_row([record[c] for c in data_file.spec.columns()[1:]])
            for record in data_file.iterate_records()}


def write_affines(destination: Source, affines: Dict[int, Affine]):
    data_file = _data_file(destination, AFFINES, 'w')
    rows = [[frame] + list(affines[frame].to_row()) for frame in sorted(affines)]
    data_file.write_data_frame(pd.DataFrame(rows, columns=data_file.spec.columns()))


def read_timing(source: Source) -> Optional[Tuple[float, float]]:
    """Mean inference and update time of a timing file, or None if it is missing or empty."""
    data_file = _data_file(source, TIMING, 'r')
    if not data_file.exists():
        return None
    df = data_file.read_data_frame()
    if df.empty:
        return None
    return float(df['inference_ms'].mean()), float(df['update_ms'].mean())


def write_timing(destination: Source, frame_results: Sequence[FrameResult]):
    with _data_file(destination, TIMING, 'w').get_record_writer() as writer:
        for r in frame_results:
            writer.write({'frame': r.frame, 'inference_ms': r.inference_ms, 'update_ms': r.update_ms})


def write_trajectory(destination: Source, truth_boxes: Dict[int, BBox], matched: MatchResult):
    """One row per ground-truth frame; prediction columns are empty where nothing was matched."""
    data_file = _data_file(destination, TRAJECTORY, 'w')
    predicted = matched.trajectory.as_dict()
    rows = [[frame, truth_boxes[frame].center[0], truth_boxes[frame].center[1]] +
            list(predicted.get(frame, (np.nan, np.nan))) for frame in sorted(truth_boxes)]
    data_file.write_data_frame(pd.DataFrame(rows, columns=data_file.spec.columns()), float_format=FLOAT_FORMAT)


_REPORT_KEYS = ('ade', 'amd', 'ade_cm', 'n_pairs', 'coverage', 'n_fragments', 'pixel_to_cm')


def _format_value(value) -> str:
    if value is None:
        return 'NA'
    if isinstance(value, int):
        return str(value)
    return FLOAT_FORMAT % value


def write_report(destination: Source, report: EvalReport):
    """Writes the accuracy part of a report as ``key=value`` lines; timing is kept out of it."""
    with _data_file(destination, REPORT, 'w').open() as f:
        for key in _REPORT_KEYS:
            f.write('{}={}\n'.format(key, _format_value(getattr(report, key))))


def read_report(source: Source) -> EvalReport:
    """
    :raise ParseError: on lines without ``=`` or a missing key.
    """
    data_file = _data_file(source, REPORT, 'r')
    values = dict()
    with data_file.open() as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            if '=' not in line:
                raise ParseError(data_file.get_path(), line_number, 'expected key=value')
            key, value = line.strip().split('=', 1)
            values[key] = None if value == 'NA' else value
    missing = [k for k in _REPORT_KEYS if k not in values]
    if missing:
        raise ParseError(data_file.get_path(), 0, 'missing keys {}'.format(missing))

    def number(key, t):
        return None if values[key] is None else t(values[key])

    return EvalReport(ade=number('ade', float), amd=number('amd', float), n_pairs=int(values['n_pairs']),
                      coverage=float(values['coverage']), n_fragments=int(values['n_fragments']),
                      pixel_to_cm=float(values['pixel_to_cm']))


def interpolate_results(results: Dict[int, List[TrackOutput]], mode: str = 'none', max_gap: int = 20,
                        length_scale: float = 10.0, noise_var: float = 0.25) -> Dict[int, List[TrackOutput]]:
    """
    Post-processes tracker results track by track with :func:`~kftrack.interp.linear_interpolate`
    or :func:`~kftrack.interp.gsi_smooth`. A filled frame takes the confidence of the sample
    before it.

    :raise ContractViolation: on an unknown mode.
    """
    if mode not in INTERPOLATION_MODES:
        raise ContractViolation("Unknown interpolation mode {}".format(mode))
    if mode == 'none':
        return {frame: list(outputs) for frame, outputs in results.items()}
    log = logging.getLogger(__name__)
    samples, confidences = collections.defaultdict(list), dict()
    for frame in sorted(results):
        for o in results[frame]:
            samples[o.track_id].append((frame, o.bbox))
            confidences[(o.track_id, frame)] = o.confidence
    processed = collections.defaultdict(list)
    fallbacks = 0
    for track_id in sorted(samples):
        tracklet = Tracklet(track_id, samples[track_id])
        if mode == 'linear':
            tracklet = linear_interpolate(tracklet, max_gap)
        elif len(tracklet.samples) >= 2:
            smoothed = gsi_smooth(tracklet, length_scale, noise_var, max_gap)
            tracklet, fallbacks = smoothed.tracklet, fallbacks + smoothed.used_fallback
        confidence = None
        for frame, box in tracklet.samples:
            confidence = confidences.get((track_id, frame), confidence)
            processed[frame].append(TrackOutput(track_id, box, confidence))
    if fallbacks:
        log.info("GSI fell back to linear interpolation on {} tracklets".format(fallbacks))
    return {frame: processed[frame] for frame in sorted(processed)}


def context_number(context: Dict[str, Any], key: str, kind: type, default):
    """
    A numeric run parameter, converted by ``kind``, or ``default`` when it is not set.

    :raise ContractViolation: if the value does not convert.
    """
    value = context.get(key)
    if value is None:
        return default
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ContractViolation("Invalid value {} for parameter {}".format(value, key))


class RunConfig(NamedTuple):
    """One benchmark invocation: every tracker runs on every (scenario, seed)."""
    trackers: Tuple[str, ...] = tuple(k.value for k in BENCHMARKED)
    scenarios: Tuple[str, ...] = tuple(k.value for k in ALL_ARCHETYPES)
    seeds: Tuple[int, ...] = (1,)
    out: str = 'runs'
    context: Optional[Dict[str, str]] = None
    interp: str = 'none'
    max_gap: int = 20
    detector_latency_ms: float = 0.0
    workers: int = 1

    def check(self) -> 'RunConfig':
        if not self.trackers or not self.seeds or not self.scenarios:
            raise ContractViolation("A run needs at least one tracker, scenario and seed")
        for tracker in self.trackers:
            TrackerKind.parse(tracker)
        for scenario in self.scenarios:
            ScenarioKind.parse(scenario)
        if self.interp not in INTERPOLATION_MODES:
            raise ContractViolation("Unknown interpolation mode {}".format(self.interp))
        if self.workers < 1 or self.max_gap < 0:
            raise ContractViolation("workers must be positive and max_gap non-negative")
        return self


class RunOutcome(NamedTuple):
    """Result of one (tracker, scenario, seed) unit; ``report`` is None when the unit failed."""
    tracker: str
    scenario: str
    seed: int
    report: Optional[EvalReport]
    error: Optional[str] = None


def simulation_dir(out: str, scenario: str, seed: int) -> str:
    return os.path.join(out, scenario, 'seed{}'.format(seed))


def simulate_scenario(engine: Engine, out: str, scenario: str, seed: int, context: Optional[Dict[str, Any]] = None) -> str:
    """Writes ground truth, detections, embeddings and affines of a scenario; returns its directory."""
    workspace = simulation_dir(out, scenario, seed)
    context = dict(context or dict())
    context.update({'scenario.kind': scenario, 'scenario.seed': str(seed)})
    engine.run(workspace, engine.expand_targets(['simulate']), context)
    return workspace


def scenario_inputs(engine: Engine, workspace: str) -> Dict[int, str]:
    """Input overrides pointing a tracker workspace at the files of its simulation."""
    return {code: engine.path(workspace, code) for code in (TRUTH, DETECTIONS, EMBEDDINGS, AFFINES)}


def _run_unit(engine: Engine, config: RunConfig, tracker: str, scenario: str, seed: int) -> RunOutcome:
    log = logging.getLogger(__name__)
    sim_dir = simulation_dir(config.out, scenario, seed)
    workspace = os.path.join(sim_dir, tracker)
    context = dict(config.context or dict())
    context.update({
        'run.tracker': tracker,
        'run.interp': config.interp,
        'run.max_gap': str(config.max_gap),
        'run.detector_latency_ms': str(config.detector_latency_ms),
    })
    try:
        engine.run(workspace, engine.expand_targets(['track', 'evaluate']), context,
                   scenario_inputs(engine, sim_dir))
    except KftrackError as e:
        log.warning("Run of {} on {} seed {} failed: {}".format(tracker, scenario, seed, e))
        return RunOutcome(tracker, scenario, seed, None, str(e))
    report = read_report(engine.path(workspace, REPORT))
    timing = read_timing(engine.path(workspace, TIMING))
    if timing is not None:
        report = report._replace(mean_inference_ms=timing[0], mean_update_ms=timing[1])
    return RunOutcome(tracker, scenario, seed, report)


def _nan(value: Optional[float]) -> float:
    return np.nan if value is None else value


def summary_frame(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    rows = [[o.tracker, o.scenario, o.seed, _nan(o.report.ade), _nan(o.report.amd), o.report.coverage,
             o.report.n_pairs] for o in outcomes if o.report is not None]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def timing_frame(outcomes: Sequence[RunOutcome]) -> pd.DataFrame:
    rows = [[o.tracker, o.scenario, o.seed, _nan(o.report.mean_inference_ms), _nan(o.report.mean_update_ms)]
            for o in outcomes if o.report is not None]
    return pd.DataFrame(rows, columns=TIMING_COLUMNS)


def _pivot(df: pd.DataFrame, values: List[str], labels: List[str]) -> pd.DataFrame:
    table = df.pivot_table(index='tracker', columns='scenario', values=values, aggfunc='mean', dropna=False)
    table = table.rename(columns=dict(zip(values, labels)), level=0).swaplevel(axis=1)
    trackers = list(dict.fromkeys(df['tracker']))
    scenarios = list(dict.fromkeys(df['scenario']))
    columns = pd.MultiIndex.from_product([scenarios, labels])
    return table.reindex(index=trackers, columns=columns)


def pivot_accuracy(summary: pd.DataFrame) -> pd.DataFrame:
    """Trackers by scenario, mean ADE and AMD over seeds."""
    return _pivot(summary, ['ade', 'amd'], ['ADE', 'AMD'])


def pivot_timing(timing: pd.DataFrame) -> pd.DataFrame:
    """Trackers by scenario, mean inference and update time over seeds."""
    return _pivot(timing, ['mean_inference_ms', 'mean_update_ms'], ['inference_ms', 'update_ms'])


def write_bench_reports(out: str, outcomes: Sequence[RunOutcome]):
    """
    Writes ``summary.csv``, ``timing.csv``, ``accuracy.csv`` and ``tables.xlsx`` at the output root.
    Only ``timing.csv`` and ``tables.xlsx`` differ between repeated runs.
    """
    log = logging.getLogger(__name__)
    summary, timing = summary_frame(outcomes), timing_frame(outcomes)
    summary.to_csv(os.path.join(out, 'summary.csv'), index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    timing.to_csv(os.path.join(out, 'timing.csv'), index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if summary.empty:
        log.warning("No successful runs, skipping the pivot tables")
        return
    accuracy = pivot_accuracy(summary)
    accuracy.to_csv(os.path.join(out, 'accuracy.csv'), float_format=FLOAT_FORMAT, lineterminator='\n')
    with pd.ExcelWriter(os.path.join(out, 'tables.xlsx'), engine='openpyxl') as writer:
        accuracy.to_excel(writer, sheet_name='accuracy')
        pivot_timing(timing).to_excel(writer, sheet_name='timing')


def run(config: RunConfig) -> List[RunOutcome]:
    """
    Runs the benchmark matrix. Every (scenario, seed) is simulated once into
    ``<out>/<scenario>/seed<N>/`` and every tracker runs on it in ``<out>/<scenario>/seed<N>/<tracker>/``.
    Failing units are logged and recorded; the others still run.

    :return: One outcome per (tracker, scenario, seed), in tracker, scenario, seed order.
    """
    log = logging.getLogger(__name__)
    config = config.check()
    engine = default_engine()
    os.makedirs(config.out, exist_ok=True)
    simulations = [(s, seed) for s in config.scenarios for seed in config.seeds]
    units = [(t, s, seed) for t in config.trackers for s, seed in simulations]
    log.info("Running {} units on {} simulations with {} workers".format(len(units), len(simulations), config.workers))
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
        for future in [executor.submit(simulate_scenario, engine, config.out, s, seed, config.context)
                       for s, seed in simulations]:
            future.result()
        futures = [executor.submit(_run_unit, engine, config, t, s, seed) for t, s, seed in units]
        outcomes = [future.result() for future in futures]
    failures = sum(1 for o in outcomes if o.report is None)
    if failures:
        log.warning("{} of {} runs failed".format(failures, len(outcomes)))
    write_bench_reports(config.out, outcomes)
    return outcomes
