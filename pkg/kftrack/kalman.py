"""
Linear Kalman filter primitives.

All functions are pure: they take immutable :class:`GaussianState` and :class:`LinearModel`
values and return new ones. Covariances are re-symmetrized after every step.
"""
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import ContractViolation, SingularMatrixError


#: Largest condition number accepted for an innovation covariance.
MAX_CONDITION = 1e12

#: Floor applied to the confidence-scaled measurement noise factor.
NSA_EPSILON = 1e-4


class GaussianState(NamedTuple):
    """Belief over the state vector: mean and covariance."""
    mean: np.ndarray
    covariance: np.ndarray


class LinearModel(NamedTuple):
    """
    Linear-Gaussian system: ``x' = F x + B u + w``, ``z = H x + v``,
    with ``w ~ N(0, Q)`` and ``v ~ N(0, R)``.
    """
    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    B: Optional[np.ndarray] = None

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def measurement_dim(self) -> int:
        return self.H.shape[0]

    def validate(self, tolerance: float = 1e-9):
        """
        Checks shapes, symmetry and definiteness of the model matrices.

        :raise ContractViolation: if any matrix is non-conformable or violates its invariant.
        """
        n = self.F.shape[0]
        if self.F.shape != (n, n):
            raise ContractViolation("F must be square, got shape {}".format(self.F.shape))
        if self.Q.shape != (n, n):
            raise ContractViolation("Q has shape {}, expected {}".format(self.Q.shape, (n, n)))
        if self.H.ndim != 2 or self.H.shape[1] != n:
            raise ContractViolation("H has shape {}, expected (k, {})".format(self.H.shape, n))
        k = self.H.shape[0]
        if self.R.shape != (k, k):
            raise ContractViolation("R has shape {}, expected {}".format(self.R.shape, (k, k)))
        if self.B is not None and (self.B.ndim != 2 or self.B.shape[0] != n):
            raise ContractViolation("B has shape {}, expected ({}, m)".format(self.B.shape, n))
        for name, matrix in (('Q', self.Q), ('R', self.R)):
            scale = max(1.0, float(np.abs(matrix).max()))
            if not np.allclose(matrix, matrix.T, atol=tolerance * scale, rtol=0.0):
                raise ContractViolation("{} is not symmetric".format(name))
            if np.linalg.eigvalsh(matrix).min() < -tolerance * max(np.trace(matrix), 1.0):
                raise ContractViolation("{} is not positive semi-definite".format(name))
        if np.linalg.eigvalsh(self.R).min() <= 0.0:
            raise ContractViolation("R is not positive definite")


class Innovation(NamedTuple):
    """Measurement residual ``y``, its covariance ``S`` and the Kalman gain ``K``."""
    residual: np.ndarray
    covariance: np.ndarray
    gain: np.ndarray


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2.0


def _check_state(state: GaussianState, model: LinearModel):
    n = model.state_dim
    if state.mean.shape != (n,):
        raise ContractViolation("state mean has shape {}, model expects ({},)".format(state.mean.shape, n))
    if state.covariance.shape != (n, n):
        raise ContractViolation("state covariance has shape {}, model expects {}".format(
            state.covariance.shape, (n, n)))
    if model.F.shape != (n, n):
        raise ContractViolation("F has shape {}, expected {}".format(model.F.shape, (n, n)))
    if model.Q.shape != (n, n):
        raise ContractViolation("Q has shape {}, expected {}".format(model.Q.shape, (n, n)))


def _check_measurement(model: LinearModel, z: np.ndarray):
    n = model.state_dim
    if model.H.ndim != 2 or model.H.shape[1] != n:
        raise ContractViolation("H has shape {}, expected (k, {})".format(model.H.shape, n))
    k = model.measurement_dim
    if model.R.shape != (k, k):
        raise ContractViolation("R has shape {}, expected {}".format(model.R.shape, (k, k)))
    if z.shape != (k,):
        raise ContractViolation("measurement z has shape {}, expected ({},)".format(z.shape, k))


def _check_conditioning(s: np.ndarray):
    condition = np.linalg.cond(s)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularMatrixError(
            "innovation covariance is singular (condition number {:.3g})".format(condition), condition)


def predict(state: GaussianState, model: LinearModel, control: Optional[np.ndarray] = None) -> GaussianState:
    """
    Projects the state and its covariance one step forward.

    :param state: Posterior at the previous step.
    :param model: System model providing ``F``, ``Q`` and optionally ``B``.
    :param control: Optional control vector ``u``; requires ``model.B``.
    :return: Prior ``(F x + B u, F P F^T + Q)``.
    :raise ContractViolation: on dimension mismatch.
    """
    _check_state(state, model)
    mean = model.F @ state.mean
    if control is not None:
        control = np.asarray(control, dtype=float)
        if model.B is None:
            raise ContractViolation("control vector supplied but model has no B matrix")
        if model.B.ndim != 2 or model.B.shape[0] != model.state_dim or control.shape != (model.B.shape[1],):
            raise ContractViolation("control u has shape {}, B has shape {}".format(control.shape, model.B.shape))
        mean = mean + model.B @ control
    covariance = model.F @ state.covariance @ model.F.T + model.Q
    return GaussianState(mean, _symmetrize(covariance))


def innovation(state: GaussianState, model: LinearModel, z: np.ndarray) -> Innovation:
    """
    Computes residual, innovation covariance and optimal gain for measurement ``z``.

    :raise SingularMatrixError: if ``S`` has condition number above 1e12.
    """
    z = np.asarray(z, dtype=float)
    _check_state(state, model)
    _check_measurement(model, z)
    H, P = model.H, state.covariance
    residual = z - H @ state.mean
    s = _symmetrize(H @ P @ H.T + model.R)
    _check_conditioning(s)
    # K = P H^T S^-1, solved as (S^-1 H P)^T since P and S are symmetric
    gain = scipy.linalg.solve(s, H @ P, assume_a='sym').T
    return Innovation(residual, s, gain)


def update(state: GaussianState, model: LinearModel, z: np.ndarray,
           joseph: bool = True) -> Tuple[GaussianState, Innovation]:
    """
    Fuses measurement ``z`` into the prior.

    :param state: Prior for the current step.
    :param model: System model providing ``H`` and ``R``.
    :param z: Measurement vector.
    :param joseph: Use the Joseph-form covariance update ``(I-KH)P(I-KH)^T + KRK^T``.
    :return: Posterior state and the innovation used to compute it.
    :raise SingularMatrixError: if the innovation covariance is singular.
    """
    inn = innovation(state, model, z)
    K, H = inn.gain, model.H
    mean = state.mean + K @ inn.residual
    i_kh = np.eye(model.state_dim) - K @ H
    if joseph:
        covariance = i_kh @ state.covariance @ i_kh.T + K @ model.R @ K.T
    else:
        covariance = i_kh @ state.covariance
    return GaussianState(mean, _symmetrize(covariance)), inn


def nsa_update(state: GaussianState, model: LinearModel, z: np.ndarray, confidence: float,
               joseph: bool = True) -> Tuple[GaussianState, Innovation]:
    """
    Update with measurement noise scaled by detection confidence:
    ``R' = max(1 - confidence, 1e-4) * R``.

    :raise ContractViolation: if confidence is outside [0, 1].
    """
    if not 0.0 <= confidence <= 1.0:
        raise ContractViolation("confidence {} outside [0, 1]".format(confidence))
    factor = max(1.0 - confidence, NSA_EPSILON)
    return update(state, model._replace(R=model.R * factor), z, joseph=joseph)


def gating_distance(state: GaussianState, model: LinearModel, z: np.ndarray) -> float:
    """
    Squared Mahalanobis distance ``y^T S^-1 y`` of the innovation of ``z``.

    :raise SingularMatrixError: if the innovation covariance is singular.
    """
    z = np.asarray(z, dtype=float)
    _check_state(state, model)
    _check_measurement(model, z)
    residual = z - model.H @ state.mean
    s = _symmetrize(model.H @ state.covariance @ model.H.T + model.R)
    _check_conditioning(s)
    return float(max(0.0, residual @ scipy.linalg.solve(s, residual, assume_a='sym')))


def gating_distances(state: GaussianState, model: LinearModel, zs: np.ndarray) -> np.ndarray:
    """Vectorized :func:`gating_distance` over the rows of ``zs``."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if zs.shape[0] == 0:
        return np.zeros(0)
    _check_state(state, model)
    _check_measurement(model, zs[0])
    s = _symmetrize(model.H @ state.covariance @ model.H.T + model.R)
    _check_conditioning(s)
    cholesky = np.linalg.cholesky(s)
    residuals = zs - model.H @ state.mean
    whitened = scipy.linalg.solve_triangular(cholesky, residuals.T, lower=True, check_finite=False)
    return np.sum(whitened * whitened, axis=0)


def run_filter(initial: GaussianState, model: LinearModel, measurements: Sequence[np.ndarray],
               controls: Optional[Sequence[np.ndarray]] = None, joseph: bool = True) -> List[GaussianState]:
    """
    Runs the predict/update cycle over a measurement sequence.

    :param initial: State estimate and covariance before the first measurement.
    :param model: System model used for every step.
    :param measurements: Measurements ``z_1 .. z_n``.
    :param controls: Optional controls ``u_1 .. u_n``.
    :param joseph: Whether to use the Joseph-form covariance update.
    :return: Posteriors after each measurement.
    """
    if controls is not None and len(controls) != len(measurements):
        raise ContractViolation("{} controls for {} measurements".format(len(controls), len(measurements)))
    state = initial
    posteriors = []
    for k, z in enumerate(measurements):
        state = predict(state, model, None if controls is None else controls[k])
        state, _ = update(state, model, z, joseph=joseph)
        posteriors.append(state)
    return posteriors
