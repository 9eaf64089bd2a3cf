"""Nonlinear front metasurface layer.

Each front element is a memoryless thresholding device with bias ``b``.
Its baseband output keeps the input phase and maps the envelope through
an AM/AM characteristic ``C``; for an ideal diode-like response
``F(u) = max(0, u - b)`` the first-harmonic extraction gives

    C(v) = 0                                                   v <= b
    C(v) = (v * arccos(b/v) - b * sqrt(1 - (b/v)**2)) / pi     v >  b

which training replaces by the modReLU-like slope ``max(0, v - b) / 2``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericFailureError


class ActivationMode(enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class BiasVector:
    b: np.ndarray
    scale: float

    def __post_init__(self):
        b = np.array(self.b, dtype=float)
        if b.ndim != 1 or b.size == 0:
            raise InvalidArgumentError("bias must be a non-empty vector")
        if not np.all(b > 0):
            raise InvalidArgumentError("bias entries must be strictly positive")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    def __len__(self):
        return self.b.size


def bias_reference_norm(H, rule="entrywise"):
    """Norm of ``H`` that sets the bias scale through :func:`sample_bias`.

    ``"frobenius"`` is ``||H||_F``. ``"entrywise"`` is ``sum |H_ij|``,
    which makes the Rayleigh scale half the mean channel-entry magnitude
    and so puts the thresholds on the scale of the received envelopes
    ``|y|``; with the Frobenius norm they are smaller by roughly
    ``sqrt(N_r N_t)``.
    """
    H = np.asarray(H)
    if rule == "frobenius":
        return float(np.linalg.norm(H))
    if rule == "entrywise":
        return float(np.sum(np.abs(H)))
    raise InvalidArgumentError(f"unknown bias reference rule {rule!r}")


def sample_bias(n_r, h_norm, n_t, rng):
    """Draw ``n_r`` Rayleigh biases with scale ``h_norm / (2 n_r n_t)``.

    A zero draw (probability zero, but possible in floating point) is
    replaced by the scale itself so every bias stays strictly positive.
    """
    if n_r < 1 or n_t < 1:
        raise InvalidArgumentError("n_r and n_t must be >= 1")
    scale = h_norm / (2.0 * n_r * n_t)
    if not scale > 0 or not np.isfinite(scale):
        raise InvalidArgumentError(f"Rayleigh scale must be positive and finite, got {scale!r}")
    b = rng.rayleigh(scale, size=n_r)
    b[b <= 0] = scale
    return BiasVector(b=b, scale=float(scale))


def amam_exact(v, b):
    """Closed-form AM/AM characteristic of the thresholding element.

    Works element-wise on arrays; ``v >= 0`` and ``b > 0`` are assumed.
    """
    v = np.asarray(v, dtype=float)
    b = np.asarray(b, dtype=float)
    v, b = np.broadcast_arrays(v, b)
    out = np.zeros(v.shape)
    on = v > b
    if np.any(on):
        ratio = b[on] / v[on]
        out[on] = (v[on] * np.arccos(ratio) - b[on] * np.sqrt(1.0 - ratio * ratio)) / np.pi
    if out.ndim == 0:
        return float(out)
    return out


def amam_quadrature(F, v, n_points=64, breakpoints=()):
    """Evaluate ``C(v) = (2/pi) * int_0^pi F(v cos phi) cos phi dphi``.

    Gauss-Legendre with ``n_points`` nodes per panel. ``breakpoints`` are
    envelope values where ``F`` has kinks; each one inside ``(-v, v)``
    splits the angle range at ``arccos(t / v)`` so that every panel sees
    a smooth integrand.
    """
    if n_points < 16:
        raise InvalidArgumentError(f"n_points must be >= 16, got {n_points}")
    if v < 0:
        raise InvalidArgumentError(f"envelope must be >= 0, got {v!r}")
    if v == 0:
        edges = [0.0, np.pi]
    else:
        cuts = [np.arccos(t / v) for t in breakpoints if -v < t < v]
        edges = sorted({0.0, np.pi, *cuts})

    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        phi = lo + half * (nodes + 1.0)
        vals = np.asarray([F(v * c) for c in np.cos(phi)], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericFailureError("F returned non-finite values during quadrature")
        total += half * np.dot(weights, vals * np.cos(phi))
    return 2.0 / np.pi * total


def activate(y, bias, mode=ActivationMode.APPROXIMATE):
    """Apply the front-layer activation element-wise.

    ``y`` is a length-``N_r`` vector or a ``(D, N_r)`` batch; the bias is
    broadcast along the last axis. Entries with ``|y| <= b`` (including
    ``y = 0``) map to exactly zero, all others keep their phase.
    """
    y = np.asarray(y, dtype=complex)
    b = bias.b if isinstance(bias, BiasVector) else np.asarray(bias, dtype=float)
    if y.ndim == 0 or y.shape[-1] != b.shape[-1]:
        raise InvalidArgumentError(
            f"activation input has trailing size {y.shape[-1:] or ()}, bias has {b.shape[-1]}"
        )
    mag = np.abs(y)
    if mode is ActivationMode.APPROXIMATE:
        out_mag = 0.5 * np.maximum(0.0, mag - b)
    elif mode is ActivationMode.EXACT:
        out_mag = amam_exact(mag, np.broadcast_to(b, mag.shape))
    else:
        raise InvalidArgumentError(f"unknown activation mode {mode!r}")
    out = np.zeros_like(y)
    on = out_mag > 0
    out[on] = out_mag[on] * (y[on] / mag[on])
    return out
