"""Tunable linear metasurface cascade and its fit to the ideal ELM weights.

The cascade response seen from the front layer is the row vector

    w = h_L^T Phi_L H_L Phi_{L-1} H_{L-1} ... Phi_1 H_1,

with ``Phi_l = diag(alpha_l * exp(j pi theta_l))``. It is always evaluated
as a chain of diagonal scalings and vector-matrix products; the
``N_l x N_r`` partial products are never formed.

Fitting minimises ``|| w* - rho w^T ||`` over (alpha, theta, rho) by
projected gradient descent with fixed-length steps.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .channels import ChannelRealization
from .elm import IdealWeights
from .errors import InvalidArgumentError, NumericFailureError

logger = logging.getLogger(__name__)

RHO_MIN = 1e-9


class PhaseRange(enum.Enum):
    HALF_CIRCLE = "half"  # theta in [0, 1], clamped
    FULL_CIRCLE = "full"  # theta in [0, 2), wrapped

    @property
    def upper(self):
        return 1.0 if self is PhaseRange.HALF_CIRCLE else 2.0

    def project(self, theta):
        if self is PhaseRange.HALF_CIRCLE:
            return np.clip(theta, 0.0, 1.0)
        wrapped = np.mod(theta, 2.0)
        wrapped[wrapped >= 2.0] = 0.0
        return wrapped

    def contains(self, theta):
        if self is PhaseRange.HALF_CIRCLE:
            return bool(np.all((theta >= 0.0) & (theta <= 1.0)))
        return bool(np.all((theta >= 0.0) & (theta < 2.0)))


@dataclass(frozen=True)
class PgdOptions:
    max_iters: int = 1500
    step_size: float = 0.01
    rel_tol: float = 1e-6
    patience: int = 20
    phase_range: PhaseRange = PhaseRange.HALF_CIRCLE

    def __post_init__(self):
        try:
            for name, kind in (("max_iters", int), ("step_size", float), ("rel_tol", float), ("patience", int)):
                object.__setattr__(self, name, kind(getattr(self, name)))
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"invalid PGD option: {exc}") from exc
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise InvalidArgumentError("step_size must be > 0")
        if self.patience < 1:
            raise InvalidArgumentError("patience must be >= 1")
        if not isinstance(self.phase_range, PhaseRange):
            object.__setattr__(self, "phase_range", PhaseRange(self.phase_range))


@dataclass
class PgdTrace:
    """Best-so-far objective ``||w* - rho w^T||`` per iteration (index 0 = init)."""

    objective_per_iter: List[float] = field(default_factory=list)
    iters_run: int = 0
    converged: bool = False

    @property
    def final_objective(self):
        return self.objective_per_iter[-1]


@dataclass(frozen=True)
class CascadeState:
    amps: Tuple[np.ndarray, ...]
    phases: Tuple[np.ndarray, ...]
    rho: float

    def __post_init__(self):
        amps = tuple(np.array(a, dtype=float) for a in self.amps)
        phases = tuple(np.array(t, dtype=float) for t in self.phases)
        if len(amps) != len(phases):
            raise InvalidArgumentError("amps and phases must have one entry per layer")
        for a, t in zip(amps, phases):
            if a.shape != t.shape or a.ndim != 1:
                raise InvalidArgumentError("per-layer amps and phases must be equal-length vectors")
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def layer_sizes(self):
        return [a.size for a in self.amps]

    def coefficients(self):
        """Per-layer complex responses ``alpha_l * exp(j pi theta_l)``."""
        return [a * np.exp(1j * np.pi * t) for a, t in zip(self.amps, self.phases)]

    def is_feasible(self, phase_range=PhaseRange.HALF_CIRCLE):
        amps_ok = all(np.all((a >= 0.0) & (a <= 1.0)) for a in self.amps)
        phases_ok = all(phase_range.contains(t) for t in self.phases)
        return amps_ok and phases_ok and self.rho >= RHO_MIN


def _check_dims(state, channels):
    if channels.n_layers == 0:
        raise InvalidArgumentError("channel realization has no tunable cascade layers")
    if state.layer_sizes != channels.layer_sizes:
        raise InvalidArgumentError(
            f"state layer sizes {state.layer_sizes} do not match channels {channels.layer_sizes}"
        )


def _forward(phis, channels):
    """Return (w, lefts) where ``lefts[l]`` is the row vector entering ``Phi_{l+1}``."""
    left = channels.terminal
    lefts = [None] * len(phis)
    for l in range(len(phis) - 1, -1, -1):
        lefts[l] = left
        left = (left * phis[l]) @ channels.layer_channels[l]
    return left, lefts


def cascade_transfer(state, channels):
    """Overall cascade response as a length-``N_r`` vector (the row ``w_phi``)."""
    _check_dims(state, channels)
    w, _ = _forward(state.coefficients(), channels)
    return w


def approximation_objective(w_star, state, channels):
    """``|| w* - rho w_phi^T ||_2``."""
    w_star = w_star.w_star if isinstance(w_star, IdealWeights) else np.asarray(w_star)
    w = cascade_transfer(state, channels)
    if w.size != w_star.size:
        raise InvalidArgumentError(f"cascade has {w.size} outputs, weights have {w_star.size}")
    return float(np.linalg.norm(w_star - state.rho * w))


def objective_and_gradient(w_star, state, channels):
    """Squared objective ``f = ||rho w - w*||^2`` and its real gradients.

    Returns ``(f, grad_amps, grad_phases, grad_rho)``. With the residual
    ``r = rho w - w*`` and ``c_l = left_l * (R_l conj(r))``, where ``R_l``
    is the partial product from ``H_l`` down to ``H_1``:

        df/dalpha_lk = 2 rho Re(c_lk exp(j pi theta_lk))
        df/dtheta_lk = 2 rho Re(c_lk j pi phi_lk)
        df/drho      = 2 Re(conj(r) . w)
    """
    w_star = w_star.w_star if isinstance(w_star, IdealWeights) else np.asarray(w_star)
    _check_dims(state, channels)
    phis = state.coefficients()
    w, lefts = _forward(phis, channels)
    r = state.rho * w - w_star
    f = float(np.vdot(r, r).real)

    back = channels.layer_channels[0] @ np.conj(r)
    grad_amps, grad_phases = [], []
    for l, phi in enumerate(phis):
        if l > 0:
            back = channels.layer_channels[l] @ (phis[l - 1] * back)
        c = lefts[l] * back
        unit = np.exp(1j * np.pi * state.phases[l])
        grad_amps.append(2.0 * state.rho * np.real(c * unit))
        grad_phases.append(2.0 * state.rho * np.real(c * 1j * np.pi * phi))
    grad_rho = 2.0 * float(np.real(np.vdot(r, w)))
    return f, grad_amps, grad_phases, grad_rho


def _optimal_gain(w, w_star):
    denom = float(np.vdot(w, w).real)
    if denom == 0.0:
        return RHO_MIN
    return max(RHO_MIN, float(np.vdot(w, w_star).real) / denom)


def init_state(channels, w_star, rng, opts=None, n_candidates=8):
    """All-pass amplitudes, random phases, least-squares optimal gain.

    ``n_candidates`` uniform phase draws are made and the one whose
    response correlates best with ``w*`` is kept; with a single draw the
    correlation is negative half of the time, which pins the gain at
    ``RHO_MIN`` where every phase gradient vanishes.
    """
    opts = opts or PgdOptions()
    w_star = w_star.w_star if isinstance(w_star, IdealWeights) else np.asarray(w_star)
    amps = [np.ones(n) for n in channels.layer_sizes]
    best = None
    for _ in range(max(1, n_candidates)):
        phases = [
            opts.phase_range.project(rng.uniform(0.0, opts.phase_range.upper, size=n))
            for n in channels.layer_sizes
        ]
        w = cascade_transfer(CascadeState(amps=amps, phases=phases, rho=1.0), channels)
        norm = np.linalg.norm(w)
        score = float(np.vdot(w, w_star).real) / norm if norm > 0 else -np.inf
        if best is None or score > best[0]:
            best = (score, phases, w)
    _, phases, w = best
    return CascadeState(amps=amps, phases=phases, rho=_optimal_gain(w, w_star))


def pgd_fit(
    w_star,
    channels: ChannelRealization,
    opts: Optional[PgdOptions] = None,
    rng: Optional[np.random.Generator] = None,
    initial_state: Optional[CascadeState] = None,
    callback: Optional[Callable[[int, CascadeState, float], None]] = None,
):
    """Fit the cascade to ``w*`` by projected gradient descent.

    Each step moves along the negative gradient of ``||rho w - w*||^2``
    with its length fixed so that the largest single parameter change is
    ``opts.step_size`` (amplitudes and phases both live in unit-length
    ranges; the gain is measured in units of ``||w*|| / ||w_init||``).
    This makes the step independent of pathloss and weight magnitudes.
    After each step amplitudes are clamped to [0, 1], phases projected
    onto ``opts.phase_range`` and the gain clamped to ``[RHO_MIN, inf)``.

    Stops after ``opts.max_iters`` steps, or once the best objective has
    improved by less than ``opts.rel_tol`` (relative) for ``opts.patience``
    consecutive steps. Returns the best state seen and its trace.
    ``callback(iteration, state, objective)`` is invoked for every iterate.
    """
    opts = opts or PgdOptions()
    w_star = w_star.w_star if isinstance(w_star, IdealWeights) else np.asarray(w_star, dtype=complex)
    if not np.all(np.isfinite(w_star)):
        raise InvalidArgumentError("w* has non-finite entries")
    if w_star.shape != (channels.n_r,):
        raise InvalidArgumentError(f"w* has shape {w_star.shape}, the cascade has {channels.n_r} outputs")
    if initial_state is None:
        if rng is None:
            raise InvalidArgumentError("rng is required when no initial state is given")
        initial_state = init_state(channels, w_star, rng, opts)
    _check_dims(initial_state, channels)

    w_norm = float(np.linalg.norm(w_star))
    w0_norm = float(np.linalg.norm(cascade_transfer(initial_state, channels)))
    if w_norm > 0 and w0_norm > 0:
        rho_unit = w_norm / w0_norm
    else:
        rho_unit = max(initial_state.rho, 1.0)

    amps = [a.copy() for a in initial_state.amps]
    phases = [t.copy() for t in initial_state.phases]
    rho = initial_state.rho
    state = initial_state
    best_state = state
    best = np.inf
    trace = PgdTrace()
    stall = 0
    step = opts.step_size

    for it in range(opts.max_iters + 1):
        f, g_amps, g_phases, g_rho = objective_and_gradient(w_star, state, channels)
        obj = float(np.sqrt(f))
        if callback is not None:
            callback(it, state, obj)
        if obj < best:
            prev = best
            best, best_state = obj, state
            stall = stall + 1 if np.isfinite(prev) and (prev - best) < opts.rel_tol * prev else 0
        else:
            stall += 1
        trace.objective_per_iter.append(best)
        trace.iters_run = it
        if best == 0.0 or stall >= opts.patience:
            trace.converged = True
            break
        if it == opts.max_iters:
            break

        if not (np.isfinite(g_rho) and all(np.all(np.isfinite(g)) for g in g_amps + g_phases)):
            raise NumericFailureError("non-finite gradient", iteration=it)
        g_rho_unit = g_rho * rho_unit
        gmax = max(abs(g_rho_unit), *(float(np.max(np.abs(g))) for g in g_amps + g_phases))
        if gmax == 0.0:
            trace.converged = True
            break
        scale = step / gmax
        amps = [np.clip(a - scale * g, 0.0, 1.0) for a, g in zip(amps, g_amps)]
        phases = [opts.phase_range.project(t - scale * g) for t, g in zip(phases, g_phases)]
        # gradient step in the coordinate rho / rho_unit
        rho = max(RHO_MIN, rho - scale * rho_unit * g_rho_unit)
        state = CascadeState(amps=amps, phases=phases, rho=rho)

    logger.debug(
        "pgd_fit: %d iterations, objective %.3e -> %.3e",
        trace.iters_run, trace.objective_per_iter[0], best,
    )
    return best_state, trace
