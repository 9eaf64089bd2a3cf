"""Random propagation quantities for the XL-MIMO receiver.

All samplers take an explicit ``numpy.random.Generator`` and are pure
functions of (dimensions, parameters, generator state).

Conventions
-----------
- Powers are given in dB and converted with ``10 ** (dB / 10)``.
- A circularly-symmetric complex Gaussian entry with variance ``v`` is
  ``sqrt(v / 2) * (N(0,1) + 1j N(0,1))``.
- The Ricean NLoS term uses the per-entry variance ``1 / sqrt(N_t N_r)``
  as written in the Ricean channel definition, so Rayleigh mode
  (variance ``P_L``) and Ricean mode with ``K = 0`` are *not*
  power-matched.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError

TWO_PI = 2.0 * np.pi


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def complex_gaussian(shape, variance, rng):
    """i.i.d. CN(0, variance) samples."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _check_counts(**counts):
    for name, value in counts.items():
        if int(value) != value or value < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class RiceanParams:
    """Ricean K-factor (linear) and departure/arrival angles in radians."""

    k_factor: float
    aod: float = 0.0
    aoa: float = 0.0

    def __post_init__(self):
        if not self.k_factor >= 0:
            raise InvalidArgumentError(f"Ricean K-factor must be >= 0, got {self.k_factor!r}")
        for name in ("aod", "aoa"):
            angle = getattr(self, name)
            if not 0.0 <= angle < TWO_PI:
                raise InvalidArgumentError(f"{name} must lie in [0, 2*pi), got {angle!r}")

    @classmethod
    def random_angles(cls, k_factor, rng):
        """Draw AoD then AoA uniformly from [0, 2*pi)."""
        aod, aoa = rng.uniform(0.0, TWO_PI, size=2)
        return cls(k_factor=float(k_factor), aod=float(aod), aoa=float(aoa))


@dataclass(frozen=True)
class ChannelRealization:
    """One quasi-static draw of every propagation coefficient.

    ``H`` is the ``N_r x N_t`` TX-RX channel, ``layer_channels[l-1]`` is
    ``H_l`` of shape ``N_l x N_{l-1}`` (``N_0 = N_r``) and ``terminal`` is
    the length-``N_L`` vector towards the single RX antenna. With no
    tunable layers both ``layer_channels`` and ``terminal`` are empty.
    """

    H: np.ndarray
    layer_channels: List[np.ndarray] = field(default_factory=list)
    terminal: Optional[np.ndarray] = None
    pathloss_db: float = 0.0
    intra_pathloss_db: float = 0.0

    def __post_init__(self):
        H = np.array(self.H, dtype=complex)
        layers = [np.array(H_l, dtype=complex) for H_l in self.layer_channels]
        terminal = None if self.terminal is None else np.array(self.terminal, dtype=complex)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "layer_channels", layers)
        object.__setattr__(self, "terminal", terminal)
        if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
            raise InvalidArgumentError(f"H must be a non-empty matrix, got shape {H.shape}")
        if not np.all(np.isfinite(H)):
            raise InvalidArgumentError("H has non-finite entries")
        cols = H.shape[0]
        for l, H_l in enumerate(layers, start=1):
            if H_l.ndim != 2 or H_l.shape[1] != cols:
                raise InvalidArgumentError(
                    f"H_{l} has shape {H_l.shape}, expected (*, {cols})"
                )
            cols = H_l.shape[0]
        if layers:
            if terminal is None or terminal.shape != (cols,):
                raise InvalidArgumentError(
                    f"terminal vector must have length {cols}"
                )
        for arr in (H, terminal, *layers):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_r(self):
        return self.H.shape[0]

    @property
    def n_t(self):
        return self.H.shape[1]

    @property
    def layer_sizes(self):
        return [H_l.shape[0] for H_l in self.layer_channels]

    @property
    def n_layers(self):
        return len(self.layer_channels)


def sample_rayleigh(n_r, n_t, pathloss_db, rng):
    """H ~ CN(0, P_L I) with ``P_L = 10 ** (pathloss_db / 10)``."""
    _check_counts(n_r=n_r, n_t=n_t)
    return complex_gaussian((n_r, n_t), float(db_to_linear(pathloss_db)), rng)


def steering_vector(n, spacing_wavelengths, angle):
    """ULA response ``exp(j 2 pi d m sin(angle))``, m = 0..n-1."""
    _check_counts(n=n)
    m = np.arange(n)
    return np.exp(1j * np.pi * 2.0 * spacing_wavelengths * m * np.sin(angle))


def sample_ricean(n_r, n_t, pathloss_db, params, rng, spacing_wavelengths=0.5):
    """Ricean channel with a rank-1 steering-vector LoS component.

    H = sqrt(P_L) (sqrt(K/(1+K)) a_r(aoa) a_t(aod)^T + sqrt(1/(1+K)) H_NLoS)
    with H_NLoS ~ CN(0, 1/sqrt(N_t N_r)).  ``K = inf`` yields pure LoS.
    """
    _check_counts(n_r=n_r, n_t=n_t)
    if not isinstance(params, RiceanParams):
        raise InvalidArgumentError("params must be a RiceanParams instance")
    k = params.k_factor
    if np.isinf(k):
        los_gain, nlos_gain = 1.0, 0.0
    else:
        los_gain, nlos_gain = np.sqrt(k / (1.0 + k)), np.sqrt(1.0 / (1.0 + k))
    H_los = np.outer(
        steering_vector(n_r, spacing_wavelengths, params.aoa),
        steering_vector(n_t, spacing_wavelengths, params.aod),
    )
    # drawn even when K = inf so the generator advances identically
    H_nlos = complex_gaussian((n_r, n_t), 1.0 / np.sqrt(n_t * n_r), rng)
    amp = np.sqrt(float(db_to_linear(pathloss_db)))
    return amp * (los_gain * H_los + nlos_gain * H_nlos)


def sample_cascade_channels(layer_sizes, n_r, intra_pathloss_db, rng):
    """Intra-cascade matrices H_1..H_L and terminal vector h_L, all CN(0, P'_L)."""
    if len(layer_sizes) == 0:
        raise InvalidArgumentError("layer_sizes must be non-empty")
    _check_counts(n_r=n_r, **{f"layer_sizes[{i}]": n for i, n in enumerate(layer_sizes)})
    variance = float(db_to_linear(intra_pathloss_db))
    layers = []
    prev = n_r
    for n_l in layer_sizes:
        layers.append(complex_gaussian((n_l, prev), variance, rng))
        prev = n_l
    terminal = complex_gaussian((prev,), variance, rng)
    return layers, terminal


def noise_variance_from_snr(snr_db, signal_power):
    """sigma^2 = signal_power / 10^(snr_db / 10)."""
    if signal_power < 0:
        raise InvalidArgumentError(f"signal_power must be >= 0, got {signal_power!r}")
    return float(signal_power / db_to_linear(snr_db))


def sample_realization(
    n_r: int,
    n_t: int,
    layer_sizes: Sequence[int],
    rng: np.random.Generator,
    pathloss_db: float = -50.0,
    intra_pathloss_db: float = -10.0,
    ricean: Optional[RiceanParams] = None,
) -> ChannelRealization:
    """Draw H (Rayleigh, or Ricean when ``ricean`` is given) and the cascade.

    An empty ``layer_sizes`` gives a front-layer-only system (no tunable
    cascade), which is what the ideal-weights variant uses.
    """
    if ricean is None:
        H = sample_rayleigh(n_r, n_t, pathloss_db, rng)
    else:
        H = sample_ricean(n_r, n_t, pathloss_db, ricean, rng)
    if layer_sizes:
        layers, terminal = sample_cascade_channels(layer_sizes, n_r, intra_pathloss_db, rng)
    else:
        layers, terminal = [], None
    return ChannelRealization(
        H=H,
        layer_channels=layers,
        terminal=terminal,
        pathloss_db=float(pathloss_db),
        intra_pathloss_db=float(intra_pathloss_db),
    )
