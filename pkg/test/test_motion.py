from kftrack import ContractViolation, DegenerateStateError
from kftrack.kalman import GaussianState, predict
from kftrack.motion import (BBox, ModelKind, bbox_to_state, build_model, initial_covariance, measurement,
                            position_indices, state_dim, state_to_bbox, velocity_indices)
from unittest import TestCase
import numpy as np


class TestBBox(TestCase):
    def test_center_and_corners(self):
        b = BBox(10.0, 20.0, 4.0, 8.0)
        self.assertTupleEqual(b.center, (12.0, 24.0))
        self.assertTupleEqual(b.corners(), (10.0, 20.0, 14.0, 28.0))
        self.assertEqual(b.area, 32.0)

    def test_constructors(self):
        self.assertEqual(BBox.from_center(12.0, 24.0, 4.0, 8.0), BBox(10.0, 20.0, 4.0, 8.0))
        self.assertEqual(BBox.from_corners(10.0, 20.0, 14.0, 28.0), BBox(10.0, 20.0, 4.0, 8.0))

    def test_check(self):
        self.assertTrue(BBox(0, 0, 1, 1).check().is_valid())
        for invalid in (BBox(0, 0, 0, 1), BBox(0, 0, 1, -1), BBox(float('nan'), 0, 1, 1)):
            with self.assertRaises(ContractViolation):
                invalid.check()


class TestModelKind(TestCase):
    def test_parse(self):
        self.assertEqual(ModelKind.parse('SORT'), ModelKind.SORT)
        self.assertEqual(ModelKind.parse(ModelKind.WH), ModelKind.WH)
        with self.assertRaises(ContractViolation):
            ModelKind.parse('polar')

    def test_layouts(self):
        self.assertEqual(state_dim('sort'), 7)
        self.assertEqual(state_dim('wh'), 8)
        self.assertEqual(state_dim('point'), 4)
        self.assertTupleEqual(position_indices('point'), (0, 2))
        self.assertTupleEqual(velocity_indices('point'), (1, 3))
        self.assertTupleEqual(velocity_indices('sort'), (4, 5))


class TestConversion(TestCase):
    box = BBox(10.0, 20.0, 4.0, 8.0)

    def test_sort_state(self):
        np.testing.assert_allclose(bbox_to_state('sort', self.box), [12.0, 24.0, 32.0, 0.5, 0.0, 0.0, 0.0])

    def test_wh_state(self):
        np.testing.assert_allclose(bbox_to_state('wh', self.box), [12.0, 24.0, 4.0, 8.0, 0.0, 0.0, 0.0, 0.0])

    def test_point_state(self):
        np.testing.assert_allclose(bbox_to_state('point', self.box), [12.0, 0.0, 24.0, 0.0])
        np.testing.assert_allclose(measurement('point', self.box), [12.0, 24.0])

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            b = BBox(*rng.uniform(-50, 50, size=2), *rng.uniform(0.5, 40, size=2))
            for kind in ('sort', 'wh'):
                np.testing.assert_allclose(state_to_bbox(kind, bbox_to_state(kind, b)), b, atol=1e-9)
            np.testing.assert_allclose(state_to_bbox('point', bbox_to_state('point', b), (b.w, b.h)), b, atol=1e-9)

    def test_degenerate_states(self):
        with self.assertRaises(DegenerateStateError):
            state_to_bbox('sort', np.array([0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0]))
        with self.assertRaises(DegenerateStateError):
            state_to_bbox('sort', np.array([0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0]))
        with self.assertRaises(DegenerateStateError):
            state_to_bbox('wh', np.array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]))

    def test_point_needs_size(self):
        with self.assertRaises(ContractViolation):
            state_to_bbox('point', np.zeros(4))

    def test_invalid_box(self):
        with self.assertRaises(ContractViolation):
            bbox_to_state('wh', BBox(0.0, 0.0, 0.0, 3.0))


class TestBuildModel(TestCase):
    def test_sort_transition(self):
        F = build_model('sort', dt=2.0).F
        expected = np.eye(7)
        expected[0, 4] = expected[1, 5] = expected[2, 6] = 2.0
        np.testing.assert_array_equal(F, expected)

    def test_wh_transition(self):
        F = build_model('wh').F
        np.testing.assert_array_equal(F[:4, 4:], np.eye(4))
        np.testing.assert_array_equal(F[4:, :4], np.zeros((4, 4)))

    def test_point_transition(self):
        np.testing.assert_array_equal(build_model('point').F,
                                      [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]])

    def test_observation(self):
        H = build_model('sort').H
        self.assertTupleEqual(H.shape, (4, 7))
        np.testing.assert_array_equal(H[:, :4], np.eye(4))
        np.testing.assert_array_equal(build_model('point').H, [[1, 0, 0, 0], [0, 0, 1, 0]])

    def test_noise(self):
        model = build_model('sort', q_scale=2.0, r_scale=3.0, area=16.0)
        np.testing.assert_allclose(np.diag(model.Q), np.array([2.0, 2.0, 8.0, 0.02, 0.2, 0.2, 0.8]) ** 2)
        np.testing.assert_allclose(np.diag(model.R), np.array([3.0, 3.0, 12.0, 0.03]) ** 2)
        model = build_model('point', q_scale=2.0, r_scale=3.0)
        np.testing.assert_allclose(np.diag(model.Q), [4.0, 0.04, 4.0, 0.04])
        np.testing.assert_allclose(model.R, 9.0 * np.eye(2))

    def test_noise_scales_with_dt(self):
        np.testing.assert_allclose(build_model('wh', dt=3.0).Q, 3.0 * build_model('wh').Q)

    def test_models_validate(self):
        for kind in ModelKind:
            build_model(kind, q_scale=0.5, r_scale=2.0, area=100.0).validate()

    def test_invalid_parameters(self):
        for kwargs in (dict(dt=0.0), dict(q_scale=-1.0), dict(r_scale=0.0), dict(area=0.0)):
            with self.assertRaises(ContractViolation):
                build_model('wh', **kwargs)

    def test_prediction_moves_box(self):
        model = build_model('wh')
        mean = bbox_to_state('wh', BBox(0.0, 0.0, 10.0, 10.0))
        mean[4:6] = [3.0, -1.0]
        predicted = predict(GaussianState(mean, initial_covariance('wh', BBox(0.0, 0.0, 10.0, 10.0))), model)
        self.assertEqual(state_to_bbox('wh', predicted.mean), BBox(3.0, -1.0, 10.0, 10.0))


class TestInitialCovariance(TestCase):
    def test_positive_diagonal(self):
        b = BBox(0.0, 0.0, 6.0, 4.0)
        for kind in ModelKind:
            covariance = initial_covariance(kind, b, q_scale=2.0, r_scale=1.5)
            self.assertEqual(covariance.shape, (state_dim(kind), state_dim(kind)))
            np.testing.assert_array_equal(covariance, np.diag(np.diag(covariance)))
            self.assertTrue((np.diag(covariance) > 0).all())

    def test_observed_components_use_measurement_noise(self):
        covariance = initial_covariance('wh', BBox(0.0, 0.0, 6.0, 4.0), q_scale=2.0, r_scale=1.5)
        np.testing.assert_allclose(np.diag(covariance), [2.25] * 4 + [4.0] * 4)
