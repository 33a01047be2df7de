import argparse
import configparser
import datetime
import logging
import os
import sys
from typing import Callable, Dict, List, Optional

from . import harness
from .engine import Engine
from .errors import ContractViolation, KftrackError
from .logger import DummyLogger, FileLogger
from .sim import ALL_ARCHETYPES, ScenarioKind
from .tracks import BENCHMARKED, TrackerKind


#: Environment variable overriding the default output directory.
OUT_VARIABLE = 'KFTRACK_OUT'

COMMANDS = ('simulate', 'track', 'eval', 'bench')


class UsageError(ContractViolation):
    """Invalid command line."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='kftrack', description='Kalman-filter multi-object tracking benchmark.')
    parser.add_argument('command', choices=COMMANDS,
                        help='simulate scenarios, track detections, evaluate results or run the full bench')
    parser.add_argument('--tracker', default=None,
                        help="tracker kind, or 'all' for the five benchmarked trackers")
    parser.add_argument('--scenario', default=None,
                        help="scenario kind, or 'all' for the four archetypes")
    parser.add_argument('--seed', default='1',
                        help='seed N, inclusive range A..B or list A,B,...')
    parser.add_argument('--config', nargs='+', required=False, default=None,
                        help='parameter file(s) in INI format')
    parser.add_argument('--params', nargs='+', required=False, default=[],
                        help='additional section.key=value parameters')
    parser.add_argument('--out', default=None,
                        help='output directory (default ${} or runs)'.format(OUT_VARIABLE))
    parser.add_argument('--interp', choices=harness.INTERPOLATION_MODES, default=None,
                        help='post-processing of tracker results')
    parser.add_argument('--detections', default=None, help='MOT detection file to track')
    parser.add_argument('--embeddings', default=None, help='embedding sidecar of the detection file')
    parser.add_argument('--affines', default=None, help='camera affine file of the detection file')
    parser.add_argument('--truth', default=None, help='MOT ground-truth file to evaluate against')
    parser.add_argument('--results', default=None, help='MOT result file to evaluate')
    parser.add_argument('--workers', type=int, default=1, help='parallel bench units')
    parser.add_argument('--no-logs', action='store_true', help='do not configure logging')
    return parser


def read_context(param_file_paths: Optional[List[str]], command_line_params: List[str]) -> Dict[str, str]:
    """
    Builds a flat ``section.key`` context from INI files, then from ``section.key=value`` pairs.
    A key without a section goes to ``default``.
    """
    context = dict()
    if not param_file_paths:
        param_file_paths = []
    for param_file_path in param_file_paths:
        if param_file_path is None:
            continue
        if not os.path.isfile(param_file_path):
            raise FileNotFoundError("Parameter file {} not found".format(param_file_path))
        config = configparser.ConfigParser()
        try:
            config.read(param_file_path)
        except configparser.Error as e:
            raise ContractViolation("Cannot parse {}: {}".format(param_file_path, e))
        for section in config.sections():
            for key in config[section]:
                context[section + '.' + key] = config[section][key]
    for param in command_line_params:
        if '=' not in param:
            raise UsageError("Parameter {} is not of the form key=value".format(param))
        key, value = param.split('=', 1)
        if '.' in key:
            section, key = key.rsplit('.', 1)
        else:
            section = 'default'
        context[section + '.' + key.lower()] = value
    return context


def parse_seeds(text: str) -> List[int]:
    """Parses ``N``, ``A..B`` (inclusive) or ``A,B,...``."""
    try:
        if '..' in text:
            first, last = text.split('..', 1)
            seeds = list(range(int(first), int(last) + 1))
        else:
            seeds = [int(seed) for seed in text.split(',')]
    except ValueError:
        raise UsageError("Invalid seed specification {}".format(text))
    if not seeds:
        raise UsageError("Empty seed range {}".format(text))
    return seeds


def _trackers(value: Optional[str]) -> List[str]:
    if value is None:
        raise UsageError("--tracker is required")
    if value == 'all':
        return [k.value for k in BENCHMARKED]
    return [TrackerKind.parse(v).value for v in value.split(',')]


def _scenarios(value: Optional[str]) -> List[str]:
    if value is None or value == 'all':
        return [k.value for k in ALL_ARCHETYPES]
    return [ScenarioKind.parse(v).value for v in value.split(',')]


def _simulate(engine: Engine, args, out: str, context: Dict[str, str]):
    for scenario in _scenarios(args.scenario):
        for seed in parse_seeds(args.seed):
            print(harness.simulate_scenario(engine, out, scenario, seed, context))


def _track(engine: Engine, args, out: str, context: Dict[str, str]):
    targets = engine.expand_targets(['track'])
    for tracker in _trackers(args.tracker):
        run_context = dict(context)
        run_context['run.tracker'] = tracker
        if args.detections:
            inputs = {harness.DETECTIONS: args.detections}
            if args.embeddings:
                inputs[harness.EMBEDDINGS] = args.embeddings
            if args.affines:
                inputs[harness.AFFINES] = args.affines
            workspace = os.path.join(out, tracker)
            engine.run(workspace, targets, run_context, inputs)
            print(engine.path(workspace, harness.FINAL))
            continue
        for scenario in _scenarios(args.scenario):
            for seed in parse_seeds(args.seed):
                sim_dir = harness.simulation_dir(out, scenario, seed)
                if not os.path.isfile(engine.path(sim_dir, harness.DETECTIONS)):
                    harness.simulate_scenario(engine, out, scenario, seed, context)
                workspace = os.path.join(sim_dir, tracker)
                engine.run(workspace, targets, run_context, harness.scenario_inputs(engine, sim_dir))
                print(engine.path(workspace, harness.FINAL))


def _print_report(engine: Engine, workspace: str):
    with open(engine.path(workspace, harness.REPORT)) as f:
        print('{}: {}'.format(workspace, ' '.join(line.strip() for line in f if line.strip())))


def _eval(engine: Engine, args, out: str, context: Dict[str, str]):
    targets = engine.expand_targets(['evaluate'])
    if args.truth or args.results:
        if not (args.truth and args.results):
            raise UsageError("eval needs both --truth and --results")
        engine.run(out, targets, context, {harness.TRUTH: args.truth, harness.FINAL: args.results})
        _print_report(engine, out)
        return
    for tracker in _trackers(args.tracker):
        for scenario in _scenarios(args.scenario):
            for seed in parse_seeds(args.seed):
                sim_dir = harness.simulation_dir(out, scenario, seed)
                workspace = os.path.join(sim_dir, tracker)
                engine.run(workspace, targets, context, {harness.TRUTH: engine.path(sim_dir, harness.TRUTH)})
                _print_report(engine, workspace)


def _bench(engine: Engine, args, out: str, context: Dict[str, str]):
    config = harness.RunConfig(
        trackers=tuple(_trackers(args.tracker or 'all')),
        scenarios=tuple(_scenarios(args.scenario)),
        seeds=tuple(parse_seeds(args.seed)),
        out=out,
        context=context,
        interp=context.get('run.interp', 'none'),
        max_gap=harness.context_number(context, 'run.max_gap', int, 20),
        detector_latency_ms=harness.context_number(context, 'run.detector_latency_ms', float, 0.0),
        workers=args.workers,
    )
    outcomes = harness.run(config)
    failed = [o for o in outcomes if o.report is None]
    print('{} runs, {} failed, summary in {}'.format(len(outcomes), len(failed), os.path.join(out, 'summary.csv')))


_DISPATCH = {
    'simulate': _simulate,
    'track': _track,
    'eval': _eval,
    'bench': _bench,
}  # type: Dict[str, Callable]


def cli(argv: Optional[List[str]] = None, timestamp: Optional[int] = None) -> int:
    """
    Runs a command line.

    :param timestamp: Optional run id, as integer in YYYYMMDDHHMMSS format.
    :return: Exit code: 0 on success, 1 on invalid usage or input, 2 on I/O errors.
    """
    if timestamp is None:
        timestamp = int(datetime.datetime.now().strftime("%Y%m%d%H%M%S"))
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write('kftrack: error: {}\n'.format(e))
        return 1
    out = args.out or os.environ.get(OUT_VARIABLE, 'runs')

    try:
        logger = FileLogger(out, timestamp) if not args.no_logs else DummyLogger()
    except OSError as e:
        sys.stderr.write('kftrack: {}\n'.format(e))
        return 2
    log = logging.getLogger(__name__)

    success, code = False, 0
    try:
        context = read_context(args.config, args.params)
        if args.interp:
            context['run.interp'] = args.interp
        logger.report_start(timestamp, args.command, context)
        log.info("Running {}".format(args.command))
        _DISPATCH[args.command](harness.default_engine(), args, out, context)
        success = True
    except KftrackError as e:
        log.error("{} failed: {}".format(args.command, e))
        sys.stderr.write('kftrack: {}\n'.format(e))
        code = 1
    except OSError as e:
        log.error("{} failed: {}".format(args.command, e))
        sys.stderr.write('kftrack: {}\n'.format(e))
        code = 2
    try:
        logger.report_finish(timestamp, success)
    except OSError:
        pass
    return code


def main():
    sys.exit(cli(sys.argv[1:]))


if __name__ == '__main__':
    main()
