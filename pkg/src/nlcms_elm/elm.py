"""Complex-valued ELM: activation matrix, closed-form ridge weights, decisions."""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .activation import ActivationMode, activate
from .channels import complex_gaussian
from .errors import InvalidArgumentError, NumericFailureError


class TargetEncoding(enum.Enum):
    """Numeric targets used for the regression and the matching threshold."""

    ZERO_ONE = "zero_one"
    PLUS_MINUS = "plus_minus"

    @property
    def threshold(self):
        return 0.5 if self is TargetEncoding.ZERO_ONE else 0.0

    def targets(self, labels):
        """Map class labels in {0, 1} to regression targets."""
        labels = np.asarray(labels)
        if not np.all((labels == 0) | (labels == 1)):
            raise InvalidArgumentError("class labels must be 0 or 1")
        if self is TargetEncoding.ZERO_ONE:
            return labels.astype(complex)
        return (2.0 * labels - 1.0).astype(complex)


class SolverPath(enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"


@dataclass(frozen=True)
class ActivationMatrix:
    G: np.ndarray
    source_mode: ActivationMode

    @property
    def shape(self):
        return self.G.shape


@dataclass(frozen=True)
class IdealWeights:
    w_star: np.ndarray
    ridge: float
    solver_path: SolverPath

    def __len__(self):
        return self.w_star.size


def encode_am(x, theta=None):
    """Amplitude-modulate features: ``x * exp(j pi theta)``.

    ``theta`` defaults to all zeros, giving a real non-negative signal.
    Accepts a single vector or a ``(D, N_t)`` batch.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise InvalidArgumentError("features must lie in [0, 1]")
    if theta is None:
        return x.astype(complex)
    return x * np.exp(1j * np.pi * np.asarray(theta, dtype=float))


def forward_to_frontend(x_bar, H):
    """Signal at the front layer, ``y = H x_bar`` (row-wise for batches)."""
    x_bar = np.asarray(x_bar)
    if x_bar.shape[-1] != H.shape[1]:
        raise InvalidArgumentError(
            f"signal length {x_bar.shape[-1]} does not match H with {H.shape[1]} columns"
        )
    if x_bar.ndim == 1:
        return H @ x_bar
    return x_bar @ H.T


def build_activation_matrix(inputs, H, bias, mode=ActivationMode.APPROXIMATE, theta=None):
    """Stack ``g(H x_bar_i)^T`` for every input row into a ``D x N_r`` matrix."""
    try:
        X = np.asarray(inputs, dtype=float)
    except ValueError as exc:
        raise InvalidArgumentError("all inputs must have the same length") from exc
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InvalidArgumentError("inputs must be a list of equal-length feature vectors")
    Y = forward_to_frontend(encode_am(X, theta), H)
    G = activate(Y, bias, mode)
    if not np.all(np.isfinite(G)):
        raise NumericFailureError("activation matrix has non-finite entries")
    return ActivationMatrix(G=G, source_mode=mode)


def _gram_factor(A, ridge):
    """Upper-triangular ``R`` and the top block ``Q_1`` with ``A^H A + l I = R^H R``.

    ``R`` is the Cholesky factor of the regularized Gram matrix, obtained
    from a QR factorization of the stacked matrix ``[A; sqrt(l) I]`` so
    the Gram matrix (and its squared condition number) is never formed.
    """
    n = A.shape[1]
    stacked = np.vstack([A, np.sqrt(ridge) * np.eye(n, dtype=A.dtype)])
    try:
        Q, R = scipy.linalg.qr(stacked, mode="economic", check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailureError(f"factorization of the regularized Gram matrix failed: {exc}") from exc
    if not np.all(np.abs(np.diag(R)) > 0):
        raise NumericFailureError("regularized Gram factor is singular")
    return Q[: A.shape[0]], R


def ridge_solve(G, z, ridge, path=None):
    """Tikhonov-regularized least squares ``(G^H G + l I)^-1 G^H z``.

    The smaller Gram matrix is factorized: the primal ``N_r x N_r`` system
    when ``N_r <= D``, otherwise the dual form ``G^H (G G^H + l I)^-1 z``.
    ``path`` forces one of the two. Both use the triangular factor of the
    regularized Gram matrix, so the solve costs two triangular
    substitutions at most and no inverse is formed.
    """
    G_mat = G.G if isinstance(G, ActivationMatrix) else np.asarray(G, dtype=complex)
    z = np.asarray(z, dtype=complex).reshape(-1)
    if not ridge > 0:
        raise InvalidArgumentError(f"ridge must be > 0, got {ridge!r}")
    D, n_r = G_mat.shape
    if z.size != D:
        raise InvalidArgumentError(f"{D} activation rows but {z.size} targets")
    if path is None:
        path = SolverPath.PRIMAL if n_r <= D else SolverPath.DUAL
    if path is SolverPath.PRIMAL:
        # R^H R w = G^H z with G = Q_1 R  =>  R w = Q_1^H z
        Q1, R = _gram_factor(G_mat, ridge)
        w = scipy.linalg.solve_triangular(R, Q1.conj().T @ z)
    else:
        # G^H = Q_1 R and G G^H + l I = R^H R  =>  w = Q_1 R^-H z
        Q1, R = _gram_factor(G_mat.conj().T, ridge)
        w = Q1 @ scipy.linalg.solve_triangular(R, z, trans="C")
    if not np.all(np.isfinite(w)):
        raise NumericFailureError("ridge solution has non-finite entries")
    return IdealWeights(w_star=w, ridge=float(ridge), solver_path=path)


def predict_ideal(weights, g_y, noise_sigma2=0.0, rng=None):
    """``(w*)^T g(y)`` plus optional CN(0, sigma^2) receiver noise.

    ``g_y`` may be a single activation vector or a ``(D, N_r)`` batch, in
    which case one independent noise sample is drawn per row.
    """
    w = weights.w_star if isinstance(weights, IdealWeights) else np.asarray(weights)
    g_y = np.asarray(g_y)
    if g_y.shape[-1] != w.size:
        raise InvalidArgumentError(f"activation length {g_y.shape[-1]} != weight length {w.size}")
    z_hat = g_y @ w
    if noise_sigma2 > 0:
        if rng is None:
            raise InvalidArgumentError("a generator is required when noise_sigma2 > 0")
        z_hat = z_hat + complex_gaussian(np.shape(z_hat), noise_sigma2, rng)
    return z_hat


def decide(z_hat, encoding=TargetEncoding.ZERO_ONE):
    """Class label 1 iff ``Re(z_hat)`` exceeds the encoding's threshold."""
    labels = (np.asarray(np.real(z_hat)) > encoding.threshold).astype(int)
    return int(labels) if labels.ndim == 0 else labels


def accuracy(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidArgumentError("predicted and truth must have equal lengths")
    if predicted.size == 0:
        raise InvalidArgumentError("cannot score an empty prediction list")
    return float(np.mean(predicted == truth))
