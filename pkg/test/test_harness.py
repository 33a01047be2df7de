from kftrack import ContractViolation, ParseError
from kftrack.harness import (FLOAT_FORMAT, RunConfig, RunOutcome, SUMMARY_COLUMNS, context_number, default_engine,
                             ingest_detections, interpolate_results, pivot_accuracy, read_affines, read_report,
                             read_results, read_timing, read_truth, run, simulation_dir, summary_frame,
                             write_affines, write_detections, write_report, write_results, write_timing)
from kftrack.cmc import Affine
from kftrack.metrics import EvalReport
from kftrack.motion import BBox
from kftrack.tracks import Detection, FrameResult, TrackOutput
from os.path import isfile, join
from shutil import rmtree
from tempfile import mkdtemp
from unittest import TestCase
import numpy as np
import pandas as pd


class TestFormats(TestCase):
    def setUp(self):
        self.workspace = mkdtemp(prefix='tmpkftrack')

    def tearDown(self):
        rmtree(self.workspace)

    def write(self, name, text):
        path = join(self.workspace, name)
        with open(path, 'w') as f:
            f.write(text)
        return path

    def test_ingest_detections(self):
        path = self.write('det.txt', '\n'.join([
            '2,-1,10,20,30,40,0.9,-1,-1,-1',
            '1,-1,0,0,10,10,0.5,-1,-1,-1',
            '2,7,50,60,10,20,0.25,-1,-1,-1',
        ]) + '\n')
        detections = ingest_detections(path)
        self.assertListEqual(sorted(detections), [1, 2])
        first, second = detections[2]
        self.assertEqual(first.bbox, BBox(10.0, 20.0, 30.0, 40.0))
        self.assertEqual(first.confidence, 0.9)
        self.assertEqual(first.frame, 2)
        self.assertIsNone(first.embedding)
        self.assertEqual(second.confidence, 0.25)

    def test_ingest_embeddings(self):
        path = self.write('det.txt', '1,-1,0,0,10,10,0.5,-1,-1,-1\n1,-1,20,0,10,10,0.5,-1,-1,-1\n')
        embeddings = self.write('emb.txt', '1,1,3,4\n5,0,1,0\n')
        with self.assertLogs('kftrack.harness', level='WARNING'):
            detections = ingest_detections(path, embeddings)
        self.assertIsNone(detections[1][0].embedding)
        np.testing.assert_allclose(detections[1][1].embedding, [0.6, 0.8])

    def test_bad_embeddings(self):
        path = self.write('det.txt', '1,-1,0,0,10,10,0.5,-1,-1,-1\n')
        for text, line in (('1,0,1,0\n1,1,1,0,0\n', 2), ('1,0,0,0\n', 1), ('1,x,1\n', 1)):
            embeddings = self.write('emb.txt', text)
            with self.assertRaises(ParseError) as raised:
                ingest_detections(path, embeddings)
            self.assertEqual(raised.exception.line_number, line)

    def test_parse_errors(self):
        for text, line in (('1,-1,0,0,10,10,0.5,-1,-1,-1\n0,-1,0,0,10,10,0.5,-1,-1,-1\n', 2),
                           ('1,-1,0,0,10,10,0.5,-1,-1,-1\n\n1,-1,0,0,0,10,0.5,-1,-1,-1\n', 3),
                           ('1,-1,0,0,10,10,1.5,-1,-1,-1\n', 1),
                           ('1,-1,0,0,10,10,0.5\n', 1),
                           ('1,-1,0,zero,10,10,0.5,-1,-1,-1\n', 1)):
            path = self.write('det.txt', text)
            with self.assertRaises(ParseError) as raised:
                ingest_detections(path)
            self.assertEqual(raised.exception.line_number, line, text)
            self.assertEqual(raised.exception.path, path)

    def test_write_detections(self):
        path = join(self.workspace, 'det.txt')
        detections = {3: [Detection(BBox(1.0, 2.0, 3.0, 4.0), 0.5)], 1: [Detection(BBox(0.0, 0.0, 1.0, 1.0), 1.0)]}
        write_detections(path, detections)
        with open(path) as f:
            self.assertEqual(f.readline().strip(),
                             '1,-1,0.000000,0.000000,1.000000,1.000000,1.000000,-1,-1,-1')
        self.assertEqual(ingest_detections(path)[3][0].bbox, BBox(1.0, 2.0, 3.0, 4.0))

    def test_truth(self):
        path = self.write('gt.txt', '2,1,0,0,10,10,1,-1,-1,-1\n1,1,1,0,10,10,1,-1,-1,-1\n1,2,5,5,10,10,1,-1,-1,-1\n')
        truth = read_truth(path)
        self.assertListEqual(sorted(truth), [1, 2])
        self.assertListEqual(sorted(truth[1]), [1, 2])
        self.assertEqual(truth[2][1], BBox(5.0, 5.0, 10.0, 10.0))
        path = self.write('gt.txt', '1,1,0,0,10,10,1,-1,-1,-1\n1,1,1,0,10,10,1,-1,-1,-1\n')
        with self.assertRaises(ParseError) as raised:
            read_truth(path)
        self.assertEqual(raised.exception.line_number, 2)

    def test_results_sorted(self):
        path = join(self.workspace, 'res.txt')
        write_results(path, {2: [TrackOutput(5, BBox(1.0, 1.0, 2.0, 2.0), 0.5),
                                 TrackOutput(3, BBox(0.0, 0.0, 2.0, 2.0), 0.75)],
                             1: [TrackOutput(5, BBox(1.5, 1.0, 2.0, 2.0), 0.5)]})
        with open(path) as f:
            self.assertListEqual([line.split(',')[:2] for line in f.read().splitlines()],
                                 [['1', '5'], ['2', '3'], ['2', '5']])
        results = read_results(path)
        self.assertListEqual([o.track_id for o in results[2]], [3, 5])
        self.assertEqual(results[2][0], TrackOutput(3, BBox(0.0, 0.0, 2.0, 2.0), 0.75))

    def test_affines(self):
        path = self.write('affines.txt', '2 1.0 0.0 0.0 1.0 5.0 -1.0\n3  2 0 0 2 0 0\n')
        affines = read_affines(path)
        np.testing.assert_array_equal(affines[2].T, [5.0, -1.0])
        np.testing.assert_array_equal(affines[3].M, 2.0 * np.eye(2))
        out = join(self.workspace, 'out.txt')
        write_affines(out, {1: Affine.translation(0.5, 0.25)})
        with open(out) as f:
            self.assertEqual(f.read(), '1 1.0 0.0 0.0 1.0 0.5 0.25\n')

    def test_timing(self):
        self.assertIsNone(read_timing(join(self.workspace, 'missing.csv')))
        self.assertIsNone(read_timing(self.write('empty.csv', 'frame,inference_ms,update_ms\n')))
        path = join(self.workspace, 'timing.csv')
        write_timing(path, [FrameResult(1, [], 10.0, 1.0), FrameResult(2, [], 20.0, 3.0)])
        with open(path) as f:
            self.assertListEqual(f.read().splitlines(), ['frame,inference_ms,update_ms', '1,10.0,1.0', '2,20.0,3.0'])
        self.assertTupleEqual(read_timing(path), (15.0, 2.0))

    def test_report(self):
        path = join(self.workspace, 'report.txt')
        report = EvalReport(ade=1.5, amd=None, n_pairs=10, coverage=0.5, n_fragments=2)
        write_report(path, report)
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertIn('amd=NA', lines)
        self.assertIn('ade_cm=' + FLOAT_FORMAT % 0.039, lines)
        self.assertEqual(read_report(path), report)

    def test_bad_report(self):
        with self.assertRaises(ParseError):
            read_report(self.write('report.txt', 'ade=1.0\n'))
        with self.assertRaises(ParseError) as raised:
            read_report(self.write('report.txt', 'ade=1.0\nnonsense\n'))
        self.assertEqual(raised.exception.line_number, 2)


class TestInterpolateResults(TestCase):
    results = {1: [TrackOutput(1, BBox(0.0, 0.0, 10.0, 10.0), 0.8)],
               4: [TrackOutput(1, BBox(30.0, 0.0, 10.0, 10.0), 0.6), TrackOutput(2, BBox(90.0, 0.0, 10.0, 10.0), 0.7)]}

    def test_none(self):
        self.assertDictEqual(interpolate_results(self.results), self.results)

    def test_linear(self):
        final = interpolate_results(self.results, 'linear')
        self.assertListEqual(sorted(final), [1, 2, 3, 4])
        self.assertEqual(final[2], [TrackOutput(1, BBox(10.0, 0.0, 10.0, 10.0), 0.8)])
        self.assertEqual(final[3][0].confidence, 0.8)
        self.assertListEqual([o.track_id for o in final[4]], [1, 2])

    def test_max_gap(self):
        self.assertDictEqual(interpolate_results(self.results, 'linear', max_gap=1), self.results)

    def test_gsi(self):
        final = interpolate_results(self.results, 'gsi')
        self.assertListEqual(sorted(final), [1, 2, 3, 4])
        self.assertEqual(final[4][1], self.results[4][1])
        x, _ = final[2][0].bbox.center
        self.assertGreater(x, 5.0)
        self.assertLess(x, 35.0)

    def test_unknown_mode(self):
        with self.assertRaises(ContractViolation):
            interpolate_results(self.results, 'cubic')


class TestRunConfig(TestCase):
    def test_defaults(self):
        config = RunConfig().check()
        self.assertEqual(len(config.trackers), 5)
        self.assertEqual(len(config.scenarios), 4)
        self.assertEqual(simulation_dir('runs', 'rally', 3), join('runs', 'rally', 'seed3'))

    def test_invalid(self):
        for config in (RunConfig(trackers=()), RunConfig(trackers=('deepsort',)), RunConfig(scenarios=('doubles',)),
                       RunConfig(interp='cubic'), RunConfig(workers=0)):
            with self.assertRaises(ContractViolation):
                config.check()

    def test_context_number(self):
        context = {'run.max_gap': '12', 'run.detector_latency_ms': 'fast'}
        self.assertEqual(context_number(context, 'run.max_gap', int, 20), 12)
        self.assertEqual(context_number(context, 'gsi.noise_var', float, 0.5), 0.5)
        with self.assertRaises(ContractViolation):
            context_number(context, 'run.detector_latency_ms', float, 0.0)


class TestTables(TestCase):
    def test_pivot_accuracy(self):
        outcomes = [RunOutcome('sort', 'rally', 1, EvalReport(ade=1.0, amd=0.5, n_pairs=10, coverage=1.0)),
                    RunOutcome('sort', 'rally', 2, EvalReport(ade=3.0, amd=1.5, n_pairs=10, coverage=1.0)),
                    RunOutcome('ocsort', 'rally', 1, EvalReport(ade=None, amd=None, n_pairs=0, coverage=0.0)),
                    RunOutcome('ocsort', 'rally', 2, None, 'failed')]
        summary = summary_frame(outcomes)
        self.assertListEqual(list(summary.columns), SUMMARY_COLUMNS)
        self.assertEqual(len(summary), 3)
        table = pivot_accuracy(summary)
        self.assertListEqual(list(table.index), ['sort', 'ocsort'])
        self.assertEqual(table.loc['sort', ('rally', 'ADE')], 2.0)
        self.assertEqual(table.loc['sort', ('rally', 'AMD')], 1.0)
        self.assertTrue(np.isnan(table.loc['ocsort', ('rally', 'ADE')]))


class TestRun(TestCase):
    def setUp(self):
        self.out = mkdtemp(prefix='tmpkftrack')

    def tearDown(self):
        rmtree(self.out)

    def test_run(self):
        config = RunConfig(trackers=('sort', 'ocsort'), scenarios=('rally',), seeds=(1,), out=join(self.out, 'a'))
        outcomes = run(config)
        self.assertListEqual([(o.tracker, o.scenario, o.seed) for o in outcomes],
                             [('sort', 'rally', 1), ('ocsort', 'rally', 1)])
        for o in outcomes:
            self.assertIsNotNone(o.report, o.error)
            self.assertGreater(o.report.n_pairs, 0)
            self.assertIsNotNone(o.report.mean_update_ms)
        for name in ('summary.csv', 'timing.csv', 'accuracy.csv', 'tables.xlsx'):
            self.assertTrue(isfile(join(config.out, name)), name)
        engine = default_engine()
        workspace = join(simulation_dir(config.out, 'rally', 1), 'sort')
        self.assertTrue(isfile(engine.path(workspace, 2200)))
        self.assertEqual(len(pd.read_excel(join(config.out, 'tables.xlsx'), sheet_name=None)), 2)

        again = config._replace(out=join(self.out, 'b'))
        run(again)
        with open(join(config.out, 'summary.csv')) as a, open(join(again.out, 'summary.csv')) as b:
            self.assertEqual(a.read(), b.read())

    def test_full_matrix(self):
        config = RunConfig(seeds=(1, 2, 3, 4, 5), workers=4, out=join(self.out, 'a'))
        outcomes = run(config)
        self.assertEqual(len(outcomes), 100)
        for o in outcomes:
            self.assertIsNotNone(o.report, o.error)
        self.assertEqual(len(pd.read_csv(join(config.out, 'summary.csv'))), 100)

        again = config._replace(out=join(self.out, 'b'))
        run(again)
        for name in ('summary.csv', 'accuracy.csv'):
            with open(join(config.out, name), 'rb') as a, open(join(again.out, name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), name)
