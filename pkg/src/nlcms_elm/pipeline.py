"""Two-step training and inference for the ideal- and OTA-weights receivers.

Training is noiseless: the activation matrix is built from the training
rows, the ridge weights are solved in closed form and, for the OTA
variant, the cascade is fitted to them. Receiver noise enters only at
inference, after the RF-chain gain:

    z_hat = rho * (w_phi . g(y)) + n,    n ~ CN(0, sigma^2)

``sigma^2`` is set once per model from the target SNR and the mean power
of the noiseless output over the training rows.
"""

import enum
from functools import cached_property
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .activation import ActivationMode, BiasVector
from .cascade import CascadeState, PgdOptions, PgdTrace, approximation_objective, cascade_transfer, pgd_fit
from .channels import ChannelRealization, complex_gaussian, noise_variance_from_snr
from .data import LabeledDataset
from .elm import (
    IdealWeights,
    TargetEncoding,
    accuracy,
    build_activation_matrix,
    decide,
    ridge_solve,
)
from .errors import InvalidArgumentError


class Variant(enum.Enum):
    IDEAL = "ideal"
    OTA = "ota"


@dataclass(frozen=True)
class TrainConfig:
    variant: Variant = Variant.IDEAL
    ridge: float = 1e-6
    snr_db: Optional[float] = 15.0
    activation: ActivationMode = ActivationMode.APPROXIMATE
    # activation used at inference; None means the training activation
    inference_activation: Optional[ActivationMode] = None
    encoding: TargetEncoding = TargetEncoding.ZERO_ONE
    pgd: PgdOptions = field(default_factory=PgdOptions)
    ideal_noise: bool = False


@dataclass(frozen=True)
class TrainedModel:
    w_star: IdealWeights
    bias: BiasVector
    channels: ChannelRealization
    encoding: TargetEncoding
    noise_sigma2: float
    train_ls_error: float
    cascade: Optional[CascadeState] = None
    pgd_trace: Optional[PgdTrace] = None
    activation: ActivationMode = ActivationMode.APPROXIMATE

    @property
    def variant(self):
        return Variant.OTA if self.cascade is not None else Variant.IDEAL

    @cached_property
    def combining_weights(self):
        """Weights applied to ``g(y)``: ``w*`` or ``rho * w_phi``."""
        if self.cascade is None:
            return self.w_star.w_star
        return self.cascade.rho * cascade_transfer(self.cascade, self.channels)

    @property
    def weight_residual(self):
        if self.cascade is None:
            return 0.0
        return approximation_objective(self.w_star, self.cascade, self.channels)


@dataclass(frozen=True)
class EvalReport:
    variant: Variant
    train_accuracy: float
    test_accuracy: float
    mean_abs_weight_residual: float
    samples_evaluated: int


def train(dataset: LabeledDataset, channels: ChannelRealization, bias: BiasVector,
          config: TrainConfig = TrainConfig(), rng=None):
    """Fit a model on the training split of ``dataset``.

    ``rng`` seeds the cascade initialisation and is only needed for the
    OTA variant. An OTA request on channels without cascade layers
    applies ``w*`` directly, as the ideal variant does.
    """
    X = dataset.X_train
    if X.shape[0] == 0:
        raise InvalidArgumentError("training split is empty")
    if X.shape[1] != channels.n_t:
        raise InvalidArgumentError(
            f"dataset has {X.shape[1]} features but H has {channels.n_t} TX antennas"
        )
    if len(bias) != channels.n_r:
        raise InvalidArgumentError(f"bias length {len(bias)} != N_r = {channels.n_r}")

    G = build_activation_matrix(X, channels.H, bias, config.activation)
    z = config.encoding.targets(dataset.y_train)
    weights = ridge_solve(G, z, config.ridge)
    ls_error = float(np.linalg.norm(z - G.G @ weights.w_star))

    cascade = trace = None
    # with no cascade layers (L = 0) the OTA variant reduces to the ideal path
    if config.variant is Variant.OTA and channels.n_layers > 0:
        if rng is None:
            raise InvalidArgumentError("the OTA variant needs a generator for initialisation")
        cascade, trace = pgd_fit(weights, channels, config.pgd, rng)
        combining = cascade.rho * cascade_transfer(cascade, channels)
    else:
        combining = weights.w_star

    sigma2 = 0.0
    if config.snr_db is not None and (config.variant is Variant.OTA or config.ideal_noise):
        power = float(np.mean(np.abs(G.G @ combining) ** 2))
        sigma2 = noise_variance_from_snr(config.snr_db, power)

    return TrainedModel(
        w_star=weights,
        bias=bias,
        channels=channels,
        encoding=config.encoding,
        noise_sigma2=sigma2,
        train_ls_error=ls_error,
        cascade=cascade,
        pgd_trace=trace,
        activation=config.inference_activation or config.activation,
    )


def _outputs(X, model, rng):
    G = build_activation_matrix(X, model.channels.H, model.bias, model.activation)
    z_hat = G.G @ model.combining_weights
    if model.noise_sigma2 > 0:
        if rng is None:
            raise InvalidArgumentError("a generator is required for noisy inference")
        z_hat = z_hat + complex_gaussian(z_hat.shape, model.noise_sigma2, rng)
    return z_hat


def infer(x, model: TrainedModel, rng=None):
    """Output ``z_hat`` and decided label for one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.channels.n_t:
        raise InvalidArgumentError(f"expected a feature vector of length {model.channels.n_t}")
    z_hat = complex(_outputs(x[None, :], model, rng)[0])
    return z_hat, decide(z_hat, model.encoding)


def predict(X, model: TrainedModel, rng=None):
    """Batched :func:`infer`: one independent noise draw per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.channels.n_t:
        raise InvalidArgumentError(f"expected rows of length {model.channels.n_t}")
    z_hat = _outputs(X, model, rng)
    return z_hat, decide(z_hat, model.encoding)


def evaluate(dataset: LabeledDataset, model: TrainedModel, rng=None):
    """Accuracy on both partitions (train rows first, then test rows)."""
    if dataset.train_idx.size == 0 or dataset.test_idx.size == 0:
        raise InvalidArgumentError("both dataset partitions must be non-empty")
    _, train_pred = predict(dataset.X_train, model, rng)
    _, test_pred = predict(dataset.X_test, model, rng)
    return EvalReport(
        variant=model.variant,
        train_accuracy=accuracy(train_pred, dataset.y_train),
        test_accuracy=accuracy(test_pred, dataset.y_test),
        mean_abs_weight_residual=model.weight_residual,
        samples_evaluated=int(dataset.train_idx.size + dataset.test_idx.size),
    )
