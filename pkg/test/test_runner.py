from kftrack.harness import read_report
from kftrack.logger import logging_config
from kftrack.runner import OUT_VARIABLE, UsageError, cli, parse_seeds, read_context
from os import environ
from os.path import dirname, isdir, isfile, join
from shutil import rmtree
from tempfile import mkdtemp
from unittest import TestCase


MOCK_PARAMS = join(dirname(__file__), 'mock_params.ini')


def mot_lines(frames, x0=10.0):
    return ''.join('{},1,{},50,20,20,0.9,-1,-1,-1\n'.format(f, x0 + 4.0 * f) for f in frames)


class TestReadContext(TestCase):
    def test_files_and_params(self):
        context = read_context([MOCK_PARAMS], ['tracker.ocsort.max_age=5', 'run.interp=gsi', 'Quiet=yes',
                                               'gsi.length_scale=12'])
        self.assertDictEqual(context, {
            'tracker.all.min_hits': '1',
            'tracker.ocsort.max_age': '5',
            'run.interp': 'gsi',
            'default.quiet': 'yes',
            'gsi.length_scale': '12',
        })

    def test_no_files(self):
        self.assertDictEqual(read_context(None, []), {})

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_context([join(dirname(__file__), 'missing.ini')], [])

    def test_malformed_param(self):
        with self.assertRaises(UsageError):
            read_context(None, ['run.interp'])


class TestParseSeeds(TestCase):
    def test_forms(self):
        self.assertListEqual(parse_seeds('3'), [3])
        self.assertListEqual(parse_seeds('1..4'), [1, 2, 3, 4])
        self.assertListEqual(parse_seeds('5,2'), [5, 2])

    def test_invalid(self):
        for text in ('x', '1..y', '3..1', ''):
            with self.assertRaises(UsageError):
                parse_seeds(text)


class TestCli(TestCase):
    def setUp(self):
        self.workspace = mkdtemp(prefix='tmpkftrack')
        self.out = join(self.workspace, 'out')

    def tearDown(self):
        rmtree(self.workspace)

    def write(self, name, text):
        path = join(self.workspace, name)
        with open(path, 'w') as f:
            f.write(text)
        return path

    def cli(self, *args):
        return cli(list(args) + ['--out', self.out, '--no-logs'])

    def test_usage(self):
        self.assertEqual(self.cli('dance'), 1)
        self.assertEqual(self.cli('track', '--bogus'), 1)
        self.assertEqual(self.cli('track', '--detections', 'x.txt'), 1)
        self.assertEqual(self.cli('track', '--tracker', 'deepsort', '--detections', 'x.txt'), 1)
        self.assertEqual(self.cli('simulate', '--seed', '3..1'), 1)
        self.assertEqual(self.cli('eval', '--truth', 'gt.txt'), 1)

    def test_missing_files(self):
        self.assertEqual(self.cli('track', '--tracker', 'sort', '--detections', join(self.workspace, 'none.txt')), 2)
        self.assertEqual(self.cli('simulate', '--config', join(self.workspace, 'none.ini')), 2)

    def test_track_detection_file(self):
        detections = self.write('det.txt', mot_lines(range(1, 21)))
        self.assertEqual(self.cli('track', '--tracker', 'sort', '--detections', detections), 0)
        self.assertTrue(isfile(join(self.out, 'sort', 'd2200_final.csv')))
        self.assertTrue(isfile(join(self.out, 'sort', 'd2100_timing.csv')))

    def test_strongsort_needs_embeddings(self):
        detections = self.write('det.txt', mot_lines(range(1, 21)))
        self.assertEqual(self.cli('track', '--tracker', 'strongsort', '--detections', detections), 1)

    def test_malformed_detections(self):
        detections = self.write('det.txt', mot_lines(range(1, 5)) + '5,1,0,0,-3,20,0.9,-1,-1,-1\n')
        self.assertEqual(self.cli('track', '--tracker', 'sort', '--detections', detections), 1)

    def test_eval_files(self):
        truth = self.write('gt.txt', mot_lines(range(1, 11)))
        results = self.write('res.txt', mot_lines(range(1, 7)))
        self.assertEqual(self.cli('eval', '--truth', truth, '--results', results), 0)
        report = read_report(join(self.out, 'd3100_report.txt'))
        self.assertEqual(report.coverage, 0.6)
        self.assertEqual(report.ade, 0.0)
        self.assertEqual(report.n_pairs, 6)

    def test_simulate_track_eval(self):
        self.assertEqual(self.cli('simulate', '--scenario', 'rally', '--seed', '1..2'), 0)
        for seed in (1, 2):
            self.assertTrue(isfile(join(self.out, 'rally', 'seed{}'.format(seed), 'd1100_detections.csv')))
        self.assertEqual(self.cli('track', '--tracker', 'ocsort', '--scenario', 'rally', '--seed', '2',
                                  '--interp', 'linear'), 0)
        workspace = join(self.out, 'rally', 'seed2', 'ocsort')
        self.assertTrue(isfile(join(workspace, 'd2200_final.csv')))
        self.assertEqual(self.cli('eval', '--tracker', 'ocsort', '--scenario', 'rally', '--seed', '2'), 0)
        report = read_report(join(workspace, 'd3100_report.txt'))
        self.assertGreater(report.n_pairs, 0)
        self.assertFalse(isdir(join(self.out, 'rally', 'seed1', 'ocsort')))

    def test_track_simulates_missing_scenario(self):
        self.assertEqual(self.cli('track', '--tracker', 'bytetrack', '--scenario', 'conf_dip', '--seed', '3'), 0)
        self.assertTrue(isfile(join(self.out, 'conf_dip', 'seed3', 'd1000_truth.csv')))

    def test_bench(self):
        self.assertEqual(self.cli('bench', '--tracker', 'sort', '--scenario', 'rally', '--params', 'run.interp=gsi'), 0)
        self.assertTrue(isfile(join(self.out, 'summary.csv')))
        self.assertTrue(isfile(join(self.out, 'rally', 'seed1', 'sort', 'd3100_report.txt')))

    def test_malformed_numeric_param(self):
        self.assertEqual(self.cli('bench', '--tracker', 'sort', '--scenario', 'rally', '--params', 'run.max_gap=x'), 1)
        self.assertFalse(isfile(join(self.out, 'summary.csv')))
        detections = self.write('det.txt', mot_lines(range(1, 6)))
        self.assertEqual(self.cli('track', '--tracker', 'sort', '--detections', detections,
                                  '--params', 'run.detector_latency_ms=fast'), 1)

    def test_out_variable(self):
        previous = environ.get(OUT_VARIABLE)
        environ[OUT_VARIABLE] = self.out
        try:
            self.assertEqual(cli(['simulate', '--scenario', 'occlusion', '--no-logs']), 0)
        finally:
            if previous is None:
                del environ[OUT_VARIABLE]
            else:
                environ[OUT_VARIABLE] = previous
        self.assertTrue(isfile(join(self.out, 'occlusion', 'seed1', 'd1000_truth.csv')))

    def test_run_log(self):
        code = cli(['simulate', '--scenario', 'rally', '--out', self.out, '--params', 'note=two words'],
                   timestamp=20261018120000)
        self.assertEqual(code, 0)
        self.assertTrue(isfile(join(self.out, 'log', '20261018120000.log')))
        with open(join(self.out, 'log', 'runs.log')) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], 'run_id|timestamp|status|command|params|elapsed_s')
        self.assertEqual(lines[1], '20261018120000|2026-10-18 12:00:00|START|simulate|default.note=two_words|')
        run_id, _, status, command, params, elapsed = lines[2].split('|')
        self.assertEqual((run_id, status, command, params), ('20261018120000', 'FINISH', '', ''))
        self.assertGreaterEqual(float(elapsed), 0.0)

    def test_quiet_libraries(self):
        config = logging_config(join(self.out, 'run.log'), 'WARNING')
        self.assertDictEqual(config['loggers'], {'openpyxl': {'level': 'WARNING'}})
        self.assertEqual(config['handlers']['console']['level'], 'WARNING')
