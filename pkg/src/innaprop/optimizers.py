"""Update rules for the inertial-Newton optimizer family and the usual
reference methods, written as pure step functions over explicit state.

Every optimizer here is a function ``(state, gradient, step size, params) ->
new state``; states are plain immutable values, so runs can be replayed,
forked, or executed concurrently. A non-finite result aborts with
``DivergenceError`` carrying the offending step index instead of silently
propagating NaNs.

Naming used throughout:

* ``theta``   parameter vector
* ``psi``     auxiliary variable of the inertial-Newton recursion,
              initialized to ``(1 - alpha*beta) * theta0`` so critical points
              are fixed points
* ``v``       exponential moving average of squared gradients (rate sigma)
* ``rms``     the scaled direction ``g / (sqrt(v) + eps)``
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ContractViolation, DivergenceError, WellPosednessError
from .numerics import ParamVector, global_norm_clip

__all__ = [
    "InnapropConfig",
    "InnapropState",
    "NaiveInnapropState",
    "MomentumVariantState",
    "DinadamState",
    "DinadamDirectState",
    "ReferenceParams",
    "ReferenceState",
    "REFERENCE_KINDS",
    "innaprop_init",
    "innaprop_step",
    "innaprop_plain_step",
    "innaprop_naive_init",
    "innaprop_naive_step",
    "innaprop_momentum_init",
    "innaprop_momentum_step",
    "dinadam_init",
    "dinadam_step",
    "dinadam_direct_init",
    "dinadam_direct_step",
    "inna_init",
    "inna_step",
    "adamw_step",
    "reference_init",
    "reference_step",
]


# ---------------------------------------------------------------------------
# Configs and states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InnapropConfig:
    """Hyperparameters shared by the inertial-Newton steps.

    ``beta`` must stay strictly above every step size the paired schedule can
    emit; that is checked again at run setup, but each step also rejects
    ``gamma >= beta`` outright.
    """

    alpha: float
    beta: float
    sigma: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    bias_correction: bool = True
    grad_clip: Optional[float] = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ContractViolation("alpha must be >= 0")
        if not self.beta > 0:
            raise ContractViolation("beta must be > 0")
        if not 0.0 <= self.sigma <= 1.0:
            raise ContractViolation("sigma must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be > 0")
        if not self.weight_decay >= 0:
            raise ContractViolation("weight_decay must be >= 0")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ContractViolation("grad_clip must be positive when set")
        if self.bias_correction and self.sigma == 1.0:
            raise ContractViolation("bias correction is undefined at sigma = 1")


@dataclass(frozen=True)
class InnapropState:
    """Three full-dimension slots: theta, psi and the squared-gradient average."""

    theta: ParamVector
    psi: ParamVector
    v: ParamVector
    k: int = 0


@dataclass(frozen=True)
class NaiveInnapropState:
    """Unreduced three-term recursion state.

    Deliberately keeps six full-dimension slots alive at once
    (theta_{k-1}, theta_k, g_{k-1}, v_k, v_{k+1}, plus the incoming gradient),
    mirroring the memory cost the reduced (theta, psi, v) form removes.
    """

    theta_prev: ParamVector
    theta_curr: ParamVector
    g_prev: ParamVector
    v_prev: ParamVector
    v_curr: ParamVector
    k: int = 0


@dataclass(frozen=True)
class MomentumVariantState:
    """State for the momentum-style integration of the scaled direction.

    ``form`` selects the direct recursion (carries m and the previous
    gradient, since the update needs the previous scaled direction) or the
    reduced recursion (carries m-tilde only). With ``m0 = 0`` and no previous
    gradient the two are related by ``mtilde_k = m_k - (c/a) * rms_{k-1}`` and
    both start at zero.
    """

    theta: ParamVector
    m: ParamVector
    v: ParamVector
    form: str  # "direct" | "reduced"
    k: int = 0
    g_prev: Optional[ParamVector] = None  # direct form only


@dataclass(frozen=True)
class DinadamState:
    """Adam-style combination of the inertial dynamics with last-step scaling."""

    theta: ParamVector
    mtilde: ParamVector
    v: ParamVector
    sigma1: float
    sigma2: float
    k: int = 0


@dataclass(frozen=True)
class DinadamDirectState:
    """Direct-recursion twin of ``DinadamState`` used by the equivalence oracle.

    Keeps the raw momentum ``m`` and the previous gradient instead of the
    memory-saving ``mtilde = m - alpha*beta*g_prev``.
    """

    theta: ParamVector
    m: ParamVector
    v: ParamVector
    g_prev: ParamVector
    sigma1: float
    sigma2: float
    k: int = 0


REFERENCE_KINDS = (
    "SGD",
    "Momentum",
    "Nesterov",
    "RMSpropMomentum",
    "Adam",
    "AdamW",
    "NAdam",
    "INNA",
)

_SLOTS_BY_KIND = {
    "SGD": (),
    "Momentum": ("m",),
    "Nesterov": ("m",),
    "RMSpropMomentum": ("m", "v"),
    "Adam": ("m", "v"),
    "AdamW": ("m", "v"),
    "NAdam": ("m", "v"),
    "INNA": ("psi",),
}


@dataclass(frozen=True)
class ReferenceParams:
    """Hyperparameters for the reference update rules; unused fields ignored."""

    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    alpha: Optional[float] = None  # INNA
    beta: Optional[float] = None  # INNA
    bias_correction: bool = True  # Adam / AdamW


@dataclass(frozen=True)
class ReferenceState:
    """Tagged state for the standard reference optimizers.

    The slot set matches the kind exactly: SGD none, Momentum/Nesterov ``m``,
    RMSpropMomentum/Adam/AdamW/NAdam ``m`` and ``v``, INNA ``psi``.
    """

    kind: str
    theta: ParamVector
    m: Optional[ParamVector] = None
    v: Optional[ParamVector] = None
    psi: Optional[ParamVector] = None
    k: int = 0

    def __post_init__(self):
        if self.kind not in _SLOTS_BY_KIND:
            raise ContractViolation(f"unknown reference kind {self.kind!r}")
        slots = _SLOTS_BY_KIND[self.kind]
        for name in ("m", "v", "psi"):
            have = getattr(self, name) is not None
            if have != (name in slots):
                raise ContractViolation(
                    f"{self.kind} state must carry exactly the slots {slots}"
                )


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _check_dim(state_theta: ParamVector, g: ParamVector):
    if g.dim != state_theta.dim:
        raise ContractViolation(
            f"gradient dimension {g.dim} does not match state dimension {state_theta.dim}"
        )


def _finite_or_diverged(step_index: int, *arrays: np.ndarray):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(step_index)


def _rms(g: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    return g / (np.sqrt(v) + eps)


def _guard_gamma(gamma: float, beta: float):
    if gamma < 0:
        raise ContractViolation("step size gamma must be >= 0")
    if gamma >= beta:
        raise WellPosednessError(
            f"step size gamma={gamma} must stay below beta={beta}"
        )


def _maybe_clip(g: ParamVector, config: InnapropConfig) -> ParamVector:
    if config.grad_clip is not None:
        return global_norm_clip(g, config.grad_clip)
    return g


# ---------------------------------------------------------------------------
# INNAprop, reduced three-slot form
# ---------------------------------------------------------------------------


def innaprop_init(config: InnapropConfig, theta0: ParamVector) -> InnapropState:
    """Initial state: v = 0 and psi = (1 - alpha*beta) * theta0."""
    psi0 = ParamVector._wrap(
        np.asarray((1.0 - config.alpha * config.beta) * theta0.data, dtype=theta0.data.dtype)
    )
    return InnapropState(theta=theta0, psi=psi0, v=ParamVector.zeros_like(theta0), k=0)


def _innaprop_core(state, g, gamma, config, *, weight_decay, bias_correction):
    _check_dim(state.theta, g)
    _guard_gamma(gamma, config.beta)
    g = _maybe_clip(g, config)

    alpha, beta, sigma, eps = config.alpha, config.beta, config.sigma, config.epsilon
    theta, psi, v = state.theta.data, state.psi.data, state.v.data
    grad = g.data
    step_index = state.k + 1

    if weight_decay:
        theta = (1.0 - weight_decay * gamma) * theta

    v_new = sigma * v + (1.0 - sigma) * grad * grad
    if bias_correction:
        v_hat = v_new / (1.0 - sigma ** step_index)
    else:
        v_hat = v_new

    psi_new = (1.0 - gamma / beta) * psi + (gamma * (1.0 / beta - alpha)) * theta
    theta_new = (
        (1.0 + gamma * (1.0 - alpha * beta) / (beta - gamma)) * theta
        - (gamma / (beta - gamma)) * psi_new
        - (gamma * beta) * _rms(grad, v_hat, eps)
    )

    _finite_or_diverged(step_index, theta_new, psi_new, v_new)
    return InnapropState(
        theta=ParamVector._wrap(theta_new),
        psi=ParamVector._wrap(psi_new),
        v=ParamVector._wrap(v_new),
        k=step_index,
    )


def innaprop_step(
    state: InnapropState, g: ParamVector, gamma_k: float, config: InnapropConfig
) -> InnapropState:
    """One full training step of the reduced recursion.

    In order: optional global-norm clip of ``g``; decoupled weight decay
    ``theta <- (1 - lambda*gamma_k) * theta``; ``v <- sigma*v + (1-sigma)*g^2``;
    bias-corrected ``v_hat = v / (1 - sigma^(k+1))`` when enabled;
    ``psi <- (1 - gamma/beta)*psi + gamma*(1/beta - alpha)*theta``; finally

        theta <- (1 + gamma*(1-alpha*beta)/(beta-gamma)) * theta
                 - gamma/(beta-gamma) * psi_new
                 - gamma*beta * g / (sqrt(v_hat) + eps)

    The gradient must be evaluated at the pre-decay ``theta``.
    """
    return _innaprop_core(
        state,
        g,
        gamma_k,
        config,
        weight_decay=config.weight_decay,
        bias_correction=config.bias_correction,
    )


def innaprop_plain_step(
    state: InnapropState, g: ParamVector, gamma: float, config: InnapropConfig
) -> InnapropState:
    """Constant-step variant: no weight decay, raw (uncorrected) ``v``."""
    return _innaprop_core(
        state, g, gamma, config, weight_decay=0.0, bias_correction=False
    )


# ---------------------------------------------------------------------------
# INNAprop, unreduced six-slot form
# ---------------------------------------------------------------------------


def innaprop_naive_init(config: InnapropConfig, theta0: ParamVector) -> NaiveInnapropState:
    zeros = ParamVector.zeros_like(theta0)
    return NaiveInnapropState(
        theta_prev=theta0,
        theta_curr=theta0,
        g_prev=zeros,
        v_prev=zeros,
        v_curr=zeros,
        k=0,
    )


def innaprop_naive_step(
    state: NaiveInnapropState, g_curr: ParamVector, gamma: float, config: InnapropConfig
) -> NaiveInnapropState:
    """Advance the three-term recursion

        theta_{k+1} = theta_k + (1 - alpha*gamma) * (theta_k - theta_{k-1})
                      - beta*gamma * (rms_k - rms_{k-1}) - gamma^2 * rms_{k-1}

    with ``rms_k = g_k / (sqrt(v_{k+1}) + eps)``. The first call performs the
    bootstrap ``theta_1 = theta_0 - gamma*beta*rms_0``, the unique start
    consistent with ``psi_0 = (1 - alpha*beta) * theta_0`` in the reduced
    form, which makes the two recursions coincide exactly from step one.
    """
    _check_dim(state.theta_curr, g_curr)
    _guard_gamma(gamma, config.beta)
    g_curr = _maybe_clip(g_curr, config)

    alpha, beta, sigma, eps = config.alpha, config.beta, config.sigma, config.epsilon
    grad = g_curr.data
    step_index = state.k + 1

    v_next = sigma * state.v_curr.data + (1.0 - sigma) * grad * grad
    rms_curr = _rms(grad, v_next, eps)

    if state.k == 0:
        theta_next = state.theta_curr.data - (gamma * beta) * rms_curr
    else:
        rms_prev = _rms(state.g_prev.data, state.v_curr.data, eps)
        theta_next = (
            state.theta_curr.data
            + (1.0 - alpha * gamma) * (state.theta_curr.data - state.theta_prev.data)
            - (beta * gamma) * (rms_curr - rms_prev)
            - (gamma * gamma) * rms_prev
        )

    _finite_or_diverged(step_index, theta_next, v_next)
    return NaiveInnapropState(
        theta_prev=state.theta_curr,
        theta_curr=ParamVector._wrap(theta_next),
        g_prev=g_curr,
        v_prev=state.v_curr,
        v_curr=ParamVector._wrap(v_next),
        k=step_index,
    )


# ---------------------------------------------------------------------------
# INNA (no adaptive scaling)
# ---------------------------------------------------------------------------


def inna_init(alpha: float, beta: float, theta0: ParamVector) -> ReferenceState:
    psi0 = ParamVector._wrap(
        np.asarray((1.0 - alpha * beta) * theta0.data, dtype=theta0.data.dtype)
    )
    return ReferenceState(kind="INNA", theta=theta0, psi=psi0)


def inna_step(
    state: ReferenceState,
    g: ParamVector,
    gamma: float,
    alpha: float,
    beta: float,
    form: str = "classic",
) -> ReferenceState:
    """One step of the plain inertial-Newton recursion.

    ``form="classic"`` is the textbook two-line update

        psi_{k+1}   = psi_k + gamma*((1/beta - alpha)*theta_k - psi_k/beta)
        theta_{k+1} = theta_k + gamma*((1/beta - alpha)*theta_k - psi_k/beta
                                        - beta*g_k)

    ``form="compact"`` substitutes psi_{k+1} into the theta update so only the
    already-updated psi needs to be held; algebraically identical.
    """
    if state.kind != "INNA":
        raise ContractViolation("inna_step requires an INNA state")
    _check_dim(state.theta, g)
    if not beta > 0:
        raise ContractViolation("beta must be > 0")
    theta, psi, grad = state.theta.data, state.psi.data, g.data
    step_index = state.k + 1

    if form == "classic":
        drift = (1.0 / beta - alpha) * theta - psi / beta
        psi_new = psi + gamma * drift
        theta_new = theta + gamma * (drift - beta * grad)
    elif form == "compact":
        _guard_gamma(gamma, beta)
        psi_new = (1.0 - gamma / beta) * psi + (gamma * (1.0 / beta - alpha)) * theta
        theta_new = (
            (1.0 + gamma * (1.0 - beta * alpha) / (beta - gamma)) * theta
            - (gamma / (beta - gamma)) * psi_new
            - (gamma * beta) * grad
        )
    else:
        raise ContractViolation(f"unknown INNA form {form!r}")

    _finite_or_diverged(step_index, theta_new, psi_new)
    return ReferenceState(
        kind="INNA",
        theta=ParamVector._wrap(theta_new),
        psi=ParamVector._wrap(psi_new),
        k=step_index,
    )


# ---------------------------------------------------------------------------
# Momentum-style variant (direct m and reduced m-tilde forms)
# ---------------------------------------------------------------------------


def innaprop_momentum_init(
    config: InnapropConfig, theta0: ParamVector, form: str = "reduced"
) -> MomentumVariantState:
    if form not in ("direct", "reduced"):
        raise ContractViolation(f"unknown momentum form {form!r}")
    zeros = ParamVector.zeros_like(theta0)
    return MomentumVariantState(
        theta=theta0,
        m=zeros,
        v=zeros,
        form=form,
        k=0,
        g_prev=zeros if form == "direct" else None,
    )


def innaprop_momentum_step(
    state: MomentumVariantState, g: ParamVector, gamma: float, config: InnapropConfig
) -> MomentumVariantState:
    """Momentum-style integration of the scaled direction.

    Direct form (coefficients a = 1 - alpha*gamma, b = beta*gamma,
    c = gamma*(beta - gamma)):

        m_{k+1}     = a*m_k + gamma^2 * rms_{k-1} + b*(rms_k - rms_{k-1})
        theta_{k+1} = theta_k - m_{k+1}

    Reduced form via mtilde_k = m_k - (c/a)*rms_{k-1}:

        mtilde_{k+1} = a*mtilde_k + gamma^2*((1-alpha*beta)/a) * rms_k
        theta_{k+1}  = theta_k - mtilde_{k+1} - (c/a) * rms_k

    The gamma^2 factor in the mtilde increment is what starves the reduced
    form of precision in F32 once the accumulated mtilde dwarfs it.
    """
    _check_dim(state.theta, g)
    g = _maybe_clip(g, config)
    alpha, beta, sigma, eps = config.alpha, config.beta, config.sigma, config.epsilon
    a = 1.0 - alpha * gamma
    if a == 0.0:
        raise ContractViolation("singular coefficient: alpha * gamma == 1")
    grad = g.data
    step_index = state.k + 1

    v_new = sigma * state.v.data + (1.0 - sigma) * grad * grad
    rms_curr = _rms(grad, v_new, eps)

    if state.form == "direct":
        rms_prev = _rms(state.g_prev.data, state.v.data, eps)
        m_new = (
            a * state.m.data
            + (gamma * gamma) * rms_prev
            + (beta * gamma) * (rms_curr - rms_prev)
        )
        theta_new = state.theta.data - m_new
        g_prev = g
    else:
        m_new = a * state.m.data + (gamma * gamma * (1.0 - alpha * beta) / a) * rms_curr
        theta_new = state.theta.data - m_new - (gamma * (beta - gamma) / a) * rms_curr
        g_prev = None

    _finite_or_diverged(step_index, theta_new, m_new, v_new)
    return MomentumVariantState(
        theta=ParamVector._wrap(theta_new),
        m=ParamVector._wrap(m_new),
        v=ParamVector._wrap(v_new),
        form=state.form,
        k=step_index,
        g_prev=g_prev,
    )


# ---------------------------------------------------------------------------
# DINAdam
# ---------------------------------------------------------------------------


def dinadam_init(theta0: ParamVector, sigma1: float, sigma2: float) -> DinadamState:
    if not (0.0 <= sigma1 <= 1.0 and 0.0 <= sigma2 <= 1.0):
        raise ContractViolation("sigma1 and sigma2 must lie in [0, 1]")
    zeros = ParamVector.zeros_like(theta0)
    return DinadamState(theta=theta0, mtilde=zeros, v=zeros, sigma1=sigma1, sigma2=sigma2)


def dinadam_step(
    state: DinadamState,
    g: ParamVector,
    eta: float,
    alpha: float,
    beta: float,
    epsilon: float = 1e-8,
) -> DinadamState:
    """Adam-flavored step of the inertial dynamics.

        v_{k+1}      = sigma2*v_k + (1-sigma2)*g_k^2
        mtilde_{k+1} = sigma1*mtilde_k
                       + (1 - sigma1 + beta*alpha*sigma1 - beta*alpha)*g_k
        theta_{k+1}  = theta_k - eta*(mtilde_{k+1} + alpha*beta*g_k)
                                   / (sqrt(v_{k+1}) + eps)

    The plus sign in the numerator is forced by the change of variable
    ``mtilde = m - alpha*beta*g_prev`` from the direct recursion; the
    direct-form twin below enforces it. At alpha=1, beta=0 this is exactly
    Adam without bias correction.
    """
    if not eta > 0:
        raise ContractViolation("eta must be > 0")
    _check_dim(state.theta, g)
    grad = g.data
    s1, s2 = state.sigma1, state.sigma2
    step_index = state.k + 1

    v_new = s2 * state.v.data + (1.0 - s2) * grad * grad
    mtilde_new = s1 * state.mtilde.data + (1.0 - s1 + beta * alpha * s1 - beta * alpha) * grad
    theta_new = state.theta.data - eta * (mtilde_new + (alpha * beta) * grad) / (
        np.sqrt(v_new) + epsilon
    )

    _finite_or_diverged(step_index, theta_new, mtilde_new, v_new)
    return replace(
        state,
        theta=ParamVector._wrap(theta_new),
        mtilde=ParamVector._wrap(mtilde_new),
        v=ParamVector._wrap(v_new),
        k=step_index,
    )


def dinadam_direct_init(theta0: ParamVector, sigma1: float, sigma2: float) -> DinadamDirectState:
    zeros = ParamVector.zeros_like(theta0)
    return DinadamDirectState(
        theta=theta0, m=zeros, v=zeros, g_prev=zeros, sigma1=sigma1, sigma2=sigma2
    )


def dinadam_direct_step(
    state: DinadamDirectState,
    g: ParamVector,
    eta: float,
    alpha: float,
    beta: float,
    epsilon: float = 1e-8,
) -> DinadamDirectState:
    """Direct momentum recursion used as the change-of-variable oracle:

        m_{k+1} = sigma1*m_k + (1-sigma1)*g_k + beta*alpha*sigma1*(g_k - g_{k-1})
        theta_{k+1} = theta_k - eta * m_{k+1} / (sqrt(v_{k+1}) + eps)
    """
    _check_dim(state.theta, g)
    grad = g.data
    s1, s2 = state.sigma1, state.sigma2
    step_index = state.k + 1

    v_new = s2 * state.v.data + (1.0 - s2) * grad * grad
    m_new = (
        s1 * state.m.data
        + (1.0 - s1) * grad
        + (beta * alpha * s1) * (grad - state.g_prev.data)
    )
    theta_new = state.theta.data - eta * m_new / (np.sqrt(v_new) + epsilon)

    _finite_or_diverged(step_index, theta_new, m_new, v_new)
    return DinadamDirectState(
        theta=ParamVector._wrap(theta_new),
        m=ParamVector._wrap(m_new),
        v=ParamVector._wrap(v_new),
        g_prev=g,
        sigma1=s1,
        sigma2=s2,
        k=step_index,
    )


# ---------------------------------------------------------------------------
# Reference optimizers
# ---------------------------------------------------------------------------


def reference_init(
    kind: str, theta0: ParamVector, params: Optional[ReferenceParams] = None
) -> ReferenceState:
    """State with exactly the slots the chosen update rule needs."""
    params = params or ReferenceParams()
    if kind == "INNA":
        if params.alpha is None or params.beta is None:
            raise ContractViolation("INNA needs alpha and beta in ReferenceParams")
        return inna_init(params.alpha, params.beta, theta0)
    slots = _SLOTS_BY_KIND.get(kind)
    if slots is None:
        raise ContractViolation(f"unknown reference kind {kind!r}")
    zeros = ParamVector.zeros_like(theta0)
    return ReferenceState(
        kind=kind,
        theta=theta0,
        m=zeros if "m" in slots else None,
        v=zeros if "v" in slots else None,
        psi=None,
    )


def _adam_family(state, grad, gamma, params, *, decoupled_decay):
    """Shared Adam/AdamW core; decay (when any) multiplies theta first."""
    b1, b2, eps, lam = params.beta1, params.beta2, params.epsilon, params.weight_decay
    theta = state.theta.data
    step_index = state.k + 1

    if decoupled_decay and lam:
        theta = (1.0 - lam * gamma) * theta
    m_new = b1 * state.m.data + (1.0 - b1) * grad
    v_new = b2 * state.v.data + (1.0 - b2) * grad * grad
    if params.bias_correction:
        m_hat = m_new / (1.0 - b1 ** step_index)
        v_hat = v_new / (1.0 - b2 ** step_index)
    else:
        m_hat, v_hat = m_new, v_new
    theta_new = theta - gamma * (m_hat / (np.sqrt(v_hat) + eps))
    return theta_new, m_new, v_new, step_index


def reference_step(
    state: ReferenceState, g: ParamVector, gamma_k: float, params: ReferenceParams
) -> ReferenceState:
    """One standard update of the selected kind.

    Conventions (stated because they differ across the literature):

    * Momentum accumulates ``m <- beta1*m + g`` and steps ``theta -= gamma*m``
      (heavy-ball form); Nesterov steps ``theta -= gamma*(g + beta1*m_new)``
      with the same accumulator.
    * RMSpropMomentum: ``v <- beta2*v + (1-beta2)*g^2``, then
      ``m <- beta1*m + g/(sqrt(v)+eps)``, ``theta -= gamma*m``.
    * Adam/AdamW bias-correct both moments with ``1 - beta^k`` at call k;
      AdamW applies decoupled decay ``theta <- (1 - lambda*gamma)*theta``
      before the update, with the gradient taken at pre-decay theta.
    * NAdam uses the plain Nesterov-Adam rule without momentum scheduling:
      ``step = gamma*(beta1*m_hat + (1-beta1)*g/(1-beta1^k)) / (sqrt(v_hat)+eps)``
      with ``m_hat = m_new/(1 - beta1^(k+1))``.
    """
    kind = state.kind
    _check_dim(state.theta, g)
    grad = g.data
    step_index = state.k + 1
    b1, b2, eps = params.beta1, params.beta2, params.epsilon

    if kind == "SGD":
        theta_new = state.theta.data - gamma_k * grad
        m_new = v_new = None
    elif kind == "Momentum":
        m = b1 * state.m.data + grad
        theta_new = state.theta.data - gamma_k * m
        m_new, v_new = m, None
    elif kind == "Nesterov":
        m = b1 * state.m.data + grad
        theta_new = state.theta.data - gamma_k * (grad + b1 * m)
        m_new, v_new = m, None
    elif kind == "RMSpropMomentum":
        v_new = b2 * state.v.data + (1.0 - b2) * grad * grad
        m_new = b1 * state.m.data + _rms(grad, v_new, eps)
        theta_new = state.theta.data - gamma_k * m_new
    elif kind in ("Adam", "AdamW"):
        theta_new, m_new, v_new, step_index = _adam_family(
            state, grad, gamma_k, params, decoupled_decay=(kind == "AdamW")
        )
    elif kind == "NAdam":
        m_new = b1 * state.m.data + (1.0 - b1) * grad
        v_new = b2 * state.v.data + (1.0 - b2) * grad * grad
        m_hat = m_new / (1.0 - b1 ** (step_index + 1))
        g_hat = grad / (1.0 - b1 ** step_index)
        v_hat = v_new / (1.0 - b2 ** step_index)
        theta_new = state.theta.data - gamma_k * (
            (b1 * m_hat + (1.0 - b1) * g_hat) / (np.sqrt(v_hat) + eps)
        )
    elif kind == "INNA":
        return inna_step(state, g, gamma_k, params.alpha, params.beta)
    else:  # pragma: no cover - guarded in ReferenceState
        raise ContractViolation(f"unknown reference kind {kind!r}")

    arrays = [theta_new] + [arr for arr in (m_new, v_new) if arr is not None]
    _finite_or_diverged(step_index, *arrays)
    return ReferenceState(
        kind=kind,
        theta=ParamVector._wrap(theta_new),
        m=ParamVector._wrap(m_new) if m_new is not None else None,
        v=ParamVector._wrap(v_new) if v_new is not None else None,
        psi=None,
        k=step_index,
    )


def adamw_step(
    state: ReferenceState,
    g: ParamVector,
    gamma_k: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    lam: float = 0.01,
) -> ReferenceState:
    """Decoupled-weight-decay Adam with the default library settings."""
    if state.kind != "AdamW":
        raise ContractViolation("adamw_step requires an AdamW state")
    params = ReferenceParams(
        beta1=beta1, beta2=beta2, epsilon=epsilon, weight_decay=lam
    )
    return reference_step(state, g, gamma_k, params)
