from kftrack import ContractViolation
from kftrack.motion import BBox
from kftrack.tracks import (BENCHMARKED, CHI2_95_4DOF, Detection, Stage, Track, TrackerConfig, TrackerKind,
                            dynamic_alpha, parse_bool)
from unittest import TestCase
import numpy as np


def detection(x, y, confidence=0.9, embedding=None, size=20.0):
    return Detection(BBox.from_center(x, y, size, size), confidence, embedding)


class TestDetection(TestCase):
    def test_check(self):
        detection(10.0, 10.0, embedding=np.array([0.6, 0.8])).check()
        with self.assertRaises(ContractViolation):
            detection(10.0, 10.0, confidence=1.5).check()
        with self.assertRaises(ContractViolation):
            detection(10.0, 10.0, embedding=np.array([1.0, 1.0])).check()
        with self.assertRaises(ContractViolation):
            Detection(BBox(0.0, 0.0, -1.0, 1.0), 0.5).check()


class TestTrackerConfig(TestCase):
    def test_defaults(self):
        config = TrackerConfig()
        self.assertEqual((config.min_hits, config.max_age, config.det_threshold), (3, 30, 0.5))
        self.assertEqual((config.byte_high, config.byte_low, config.lambda_app), (0.6, 0.1, 0.5))
        self.assertEqual((config.ema_alpha, config.da_sigma), (0.9, 0.6))
        self.assertAlmostEqual(CHI2_95_4DOF, 9.4877, places=4)

    def test_for_kind(self):
        self.assertEqual(TrackerConfig.for_kind('botsort').model_kind, 'wh')
        self.assertTrue(TrackerConfig.for_kind('strongsort').use_nsa)
        self.assertEqual(TrackerConfig.for_kind('ocsort'), TrackerConfig())

    def test_from_context(self):
        context = {'tracker.all.min_hits': '1', 'tracker.all.max_age': '10', 'tracker.ocsort.max_age': '5',
                   'tracker.ocsort.use_oru': 'false', 'tracker.sort.max_age': '99', 'run.interp': 'gsi'}
        config = TrackerConfig.from_context(context, 'ocsort')
        self.assertEqual(config.min_hits, 1)
        self.assertEqual(config.max_age, 5)
        self.assertFalse(config.use_oru)
        self.assertEqual(TrackerConfig.from_context(context, 'bytetrack').max_age, 10)

    def test_from_context_keeps_kind_defaults(self):
        config = TrackerConfig.from_context({'tracker.all.lambda_app': '0.98'}, 'strongsort')
        self.assertEqual(config.lambda_app, 0.98)
        self.assertTrue(config.use_nsa)

    def test_invalid_context(self):
        with self.assertRaises(ContractViolation):
            TrackerConfig.from_context({'tracker.all.min_hit': '1'}, 'sort')
        with self.assertRaises(ContractViolation):
            TrackerConfig.from_context({'tracker.sort.min_hits': 'three'}, 'sort')
        with self.assertRaises(ContractViolation):
            TrackerConfig.from_context({'tracker.sort.use_cmc': 'maybe'}, 'sort')
        with self.assertRaises(ContractViolation):
            TrackerConfig.from_context({'tracker.sort.byte_low': '0.7'}, 'sort')

    def test_validate(self):
        for invalid in (TrackerConfig(min_hits=0), TrackerConfig(max_age=0), TrackerConfig(delta_t_ocm=0),
                        TrackerConfig(ema_alpha=1.5), TrackerConfig(da_sigma=1.0), TrackerConfig(model_kind='xy')):
            with self.assertRaises(ContractViolation):
                invalid.validate()

    def test_parse_bool(self):
        self.assertTrue(parse_bool('Yes'))
        self.assertFalse(parse_bool(' 0 '))
        with self.assertRaises(ContractViolation):
            parse_bool('perhaps')


class TestTrackerKind(TestCase):
    def test_parse(self):
        self.assertEqual(TrackerKind.parse('ByteTrack'), TrackerKind.BYTETRACK)
        with self.assertRaises(ContractViolation):
            TrackerKind.parse('deepsort')

    def test_benchmarked(self):
        self.assertEqual(len(BENCHMARKED), 5)
        self.assertNotIn(TrackerKind.SORT, BENCHMARKED)


class TestDynamicAlpha(TestCase):
    def test_limits(self):
        self.assertAlmostEqual(dynamic_alpha(1.0, 0.9, 0.6), 0.9)
        self.assertEqual(dynamic_alpha(0.6, 0.9, 0.6), 1.0)
        self.assertEqual(dynamic_alpha(0.2, 0.9, 0.6), 1.0)
        self.assertAlmostEqual(dynamic_alpha(0.8, 0.9, 0.6), 0.95)


class TestTrack(TestCase):
    def test_lifecycle(self):
        config = TrackerConfig(max_age=2)
        track = Track(1, detection(50.0, 50.0), 1, config)
        self.assertEqual(track.stage, Stage.TENTATIVE)
        track.update(detection(50.0, 50.0), 2)
        self.assertEqual(track.stage, Stage.TENTATIVE)
        track.update(detection(50.0, 50.0), 3)
        self.assertEqual(track.stage, Stage.CONFIRMED)
        for expected in (Stage.LOST, Stage.LOST, Stage.REMOVED):
            track.predict()
            track.mark_missed()
            self.assertEqual(track.stage, expected)

    def test_tentative_miss_removes(self):
        track = Track(1, detection(50.0, 50.0), 1, TrackerConfig())
        track.predict()
        track.mark_missed()
        self.assertEqual(track.stage, Stage.REMOVED)

    def test_lost_track_reactivates(self):
        track = Track(1, detection(50.0, 50.0), 1, TrackerConfig(min_hits=1))
        self.assertEqual(track.stage, Stage.CONFIRMED)
        track.predict()
        track.mark_missed()
        track.predict()
        track.update(detection(50.0, 50.0), 3)
        self.assertEqual(track.stage, Stage.CONFIRMED)
        self.assertEqual(track.age_since_update, 0)

    def test_box_follows_updates(self):
        track = Track(1, detection(50.0, 50.0), 1, TrackerConfig())
        for frame in range(2, 12):
            track.predict()
            track.update(detection(50.0 + 2.0 * (frame - 1), 50.0), frame)
        x, y = track.box().center
        self.assertLess(abs(x - 70.0), 0.5)
        self.assertLess(abs(y - 50.0), 0.5)
        self.assertGreater(track.state.mean[4], 0.0)

    def test_direction(self):
        track = Track(1, detection(0.0, 0.0), 1, TrackerConfig(delta_t_ocm=2))
        self.assertEqual(track.direction(2), (None, None))
        for frame, x in ((2, 3.0), (3, 6.0)):
            track.predict()
            track.update(detection(x, 4.0 * frame - 4.0), frame)
        anchor, direction = track.direction(2)
        np.testing.assert_allclose(anchor, [0.0, 0.0])
        np.testing.assert_allclose(direction, [0.6, 0.8])

    def test_appearance_ema(self):
        track = Track(1, detection(0.0, 0.0, embedding=np.array([1.0, 0.0])), 1, TrackerConfig())
        track.update_appearance(np.array([0.0, 1.0]), 0.5)
        np.testing.assert_allclose(track.appearance, np.array([1.0, 1.0]) / np.sqrt(2.0))
        track.update_appearance(None, 0.5)
        np.testing.assert_allclose(track.appearance, np.array([1.0, 1.0]) / np.sqrt(2.0))
        track.update_appearance(np.array([0.0, 1.0]), 1.0)
        np.testing.assert_allclose(track.appearance, np.array([1.0, 1.0]) / np.sqrt(2.0))

    def test_first_embedding_is_adopted(self):
        track = Track(1, detection(0.0, 0.0), 1, TrackerConfig())
        self.assertIsNone(track.appearance)
        track.update_appearance(np.array([0.0, 1.0]), 0.9)
        np.testing.assert_array_equal(track.appearance, [0.0, 1.0])

    def test_re_update_shrinks_covariance(self):
        config = TrackerConfig(model_kind='wh')
        observed = [(frame, detection(100.0 + 3.0 * frame, 100.0)) for frame in range(1, 11)]
        tracks = [Track(1, observed[0][1], 1, config), Track(2, observed[0][1], 1, config)]
        for track in tracks:
            for frame, d in observed[1:]:
                track.predict()
                track.update(d, frame)
            track.predict(6)
        reappearance = detection(100.0 + 3.0 * 10 - 6.0, 100.0)
        tracks[0].update(reappearance, 16, re_update=True)
        tracks[1].update(reappearance, 16, re_update=False)
        self.assertLess(np.trace(tracks[0].state.covariance), np.trace(tracks[1].state.covariance))
        self.assertEqual(tracks[0].last_observation[0], 16)
