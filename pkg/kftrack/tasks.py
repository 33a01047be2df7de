"""
Tasks of the packaged tracking pipeline (see ``pipeline.yaml``).

Tasks read their parameters from the run context:

* ``scenario.kind``, ``scenario.seed``: scenario to simulate;
* ``run.tracker``, ``run.detector_latency_ms``, ``run.use_cmc`` and ``tracker.<kind>.<field>``: tracking;
* ``run.interp``, ``run.max_gap``, ``gsi.length_scale``, ``gsi.noise_var``: post-processing;
* ``eval.pixel_to_cm``: report unit conversion.
"""
import collections
import logging
from typing import Any, Dict

from . import harness
from .engine import Task
from .file import DataFile
from .metrics import PIXEL_TO_CM, evaluate_targets, match_outputs
from .sim import generate
from .trackers import create, track_sequence
from .tracks import TrackerConfig, parse_bool


class SimulateTask(Task):
    def get_input_data_file_codes(self):
        return []

    def get_output_data_file_codes(self):
        return [harness.TRUTH, harness.DETECTIONS, harness.EMBEDDINGS, harness.AFFINES]

    def run(self, input_files: Dict[int, DataFile], output_files: Dict[int, DataFile], context: Dict[str, Any]):
        log = logging.getLogger(__name__)
        scenario = generate(context.get('scenario.kind', 'rally'),
                            harness.context_number(context, 'scenario.seed', int, 1))
        harness.write_truth(output_files[harness.TRUTH], scenario.truth)
        harness.write_detections(output_files[harness.DETECTIONS], scenario.detections)
        count = harness.write_embeddings(output_files[harness.EMBEDDINGS], scenario.detections)
        harness.write_affines(output_files[harness.AFFINES], scenario.affines)
        log.info("Simulated {} seed {}: {} frames, {} embeddings, {} affines".format(
            scenario.kind.value, scenario.seed, scenario.frame_count, count, len(scenario.affines)))


class TrackTask(Task):
    def get_input_data_file_codes(self):
        return [harness.DETECTIONS, harness.EMBEDDINGS, harness.AFFINES]

    def get_output_data_file_codes(self):
        return [harness.RESULTS, harness.TIMING]

    @staticmethod
    def _use_cmc(context: Dict[str, Any], config: TrackerConfig, has_affines: bool) -> bool:
        if 'run.use_cmc' in context:
            return parse_bool(context['run.use_cmc'])
        if any(k.startswith('tracker.') and k.endswith('.use_cmc') for k in context):
            return config.use_cmc
        return has_affines

    def run(self, input_files: Dict[int, DataFile], output_files: Dict[int, DataFile], context: Dict[str, Any]):
        log = logging.getLogger(__name__)
        kind = context.get('run.tracker', 'sort')
        embeddings = input_files[harness.EMBEDDINGS]
        detections = harness.ingest_detections(input_files[harness.DETECTIONS],
                                               embeddings if embeddings.exists() else None)
        affines = harness.read_affines(input_files[harness.AFFINES]) if input_files[harness.AFFINES].exists() else {}
        config = TrackerConfig.from_context(context, kind)
        config = config._replace(use_cmc=self._use_cmc(context, config, bool(affines)))
        tracker = create(kind, config, harness.context_number(context, 'run.detector_latency_ms', float, 0.0))
        last_frame = max(list(detections) + list(affines), default=0)
        log.info("Tracking {} frames with {} (use_cmc={})".format(last_frame, tracker, config.use_cmc))
        frame_results = track_sequence(tracker, detections, last_frame, affines)
        warnings = collections.Counter(w for r in frame_results for w in r.warnings)
        for warning, count in sorted(warnings.items()):
            log.warning("{} on {} frames".format(warning, count))
        harness.write_results(output_files[harness.RESULTS], {r.frame: r.outputs for r in frame_results})
        harness.write_timing(output_files[harness.TIMING], frame_results)


class InterpolateTask(Task):
    def get_input_data_file_codes(self):
        return [harness.RESULTS]

    def get_output_data_file_codes(self):
        return [harness.FINAL]

    def run(self, input_files: Dict[int, DataFile], output_files: Dict[int, DataFile], context: Dict[str, Any]):
        results = harness.read_results(input_files[harness.RESULTS])
        final = harness.interpolate_results(results, context.get('run.interp', 'none'),
                                            harness.context_number(context, 'run.max_gap', int, 20),
                                            harness.context_number(context, 'gsi.length_scale', float, 10.0),
                                            harness.context_number(context, 'gsi.noise_var', float, 0.25))
        harness.write_results(output_files[harness.FINAL], final)


class EvaluateTask(Task):
    def get_input_data_file_codes(self):
        return [harness.TRUTH, harness.TIMING, harness.FINAL]

    def get_output_data_file_codes(self):
        return [harness.TRAJECTORY, harness.REPORT]

    def run(self, input_files: Dict[int, DataFile], output_files: Dict[int, DataFile], context: Dict[str, Any]):
        log = logging.getLogger(__name__)
        truth = harness.read_truth(input_files[harness.TRUTH])
        outputs = harness.read_results(input_files[harness.FINAL])
        timing = harness.read_timing(input_files[harness.TIMING])
        report = evaluate_targets(truth, outputs, timing,
                                  pixel_to_cm=harness.context_number(context, 'eval.pixel_to_cm', float, PIXEL_TO_CM))
        # plot-ready trajectory of the first target
        target = min(truth) if truth else None
        boxes = truth[target] if target is not None else dict()
        harness.write_trajectory(output_files[harness.TRAJECTORY], boxes, match_outputs(outputs, boxes))
        harness.write_report(output_files[harness.REPORT], report)
        log.info("ADE {} AMD {} coverage {:.3f} over {} pairs".format(report.ade, report.amd, report.coverage,
                                                                     report.n_pairs))
