"""GAN and classifier loss functions with analytic gradients.

All losses are batch means computed in logit space with numerically
stable formulations (softplus / log-sum-exp), valid for |logit| well past
1e3. Each ``*_with_grad`` variant returns the loss together with its
gradient w.r.t. the logits, for use by the hand-written backward passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, LabelOutOfRange


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form is overflow-free for any float input
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _f64(logits: np.ndarray) -> np.ndarray:
    # loss math always runs in float64 regardless of activation dtype
    return np.asarray(logits, dtype=np.float64)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = _f64(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def adversarial_losses(d_real_logits: np.ndarray, d_fake_logits: np.ndarray) -> tuple[float, float]:
    """Discriminator and generator adversarial losses from raw logits.

    The discriminator loss is sigmoid BCE against targets 1 (real) and 0
    (fake); the generator loss is the non-saturating form, BCE of the fake
    logits against target 1.
    """
    d_real_logits, d_fake_logits = _f64(d_real_logits), _f64(d_fake_logits)
    l_d = float(_softplus(-d_real_logits).mean() + _softplus(d_fake_logits).mean())
    l_g = float(_softplus(-d_fake_logits).mean())
    return l_d, l_g


def discriminator_loss_with_grads(
    d_real_logits: np.ndarray, d_fake_logits: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """L_D plus its gradients w.r.t. real and fake logits."""
    d_real_logits, d_fake_logits = _f64(d_real_logits), _f64(d_fake_logits)
    n_real = d_real_logits.shape[0]
    n_fake = d_fake_logits.shape[0]
    value = float(_softplus(-d_real_logits).mean() + _softplus(d_fake_logits).mean())
    grad_real = (_sigmoid(d_real_logits) - 1.0) / n_real
    grad_fake = _sigmoid(d_fake_logits) / n_fake
    return value, grad_real, grad_fake


def generator_adversarial_loss_with_grad(d_fake_logits: np.ndarray) -> tuple[float, np.ndarray]:
    """Non-saturating generator loss plus its gradient w.r.t. fake logits."""
    d_fake_logits = _f64(d_fake_logits)
    n = d_fake_logits.shape[0]
    value = float(_softplus(-d_fake_logits).mean())
    grad = (_sigmoid(d_fake_logits) - 1.0) / n
    return value, grad


def _check_labels(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise InvariantViolation(
            f"need logits [batch, K] and labels [batch], got {logits.shape} / {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise LabelOutOfRange(f"labels must lie in [0, {logits.shape[1]})")
    return labels


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log softmax probability of the true class."""
    labels = _check_labels(logits, labels)
    logp = log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def cross_entropy_with_grad(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    labels = _check_labels(logits, labels)
    logp = log_softmax(logits)
    n = len(labels)
    value = float(-logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return value, grad / n


def subject_invariance_loss(subject_logits: np.ndarray) -> float:
    """Mean over the batch of the largest softmax probability per row.

    The infimum is 1/N_sub (uniform rows) and the supremum 1 (confident
    rows), so minimizing it drives predictions toward uniformity.
    """
    subject_logits = _f64(subject_logits)
    if subject_logits.ndim != 2:
        raise InvariantViolation(f"need logits [batch, N_sub], got shape {subject_logits.shape}")
    return float(softmax(subject_logits).max(axis=1).mean())


def subject_invariance_with_grad(subject_logits: np.ndarray) -> tuple[float, np.ndarray]:
    subject_logits = _f64(subject_logits)
    if subject_logits.ndim != 2:
        raise InvariantViolation(f"need logits [batch, N_sub], got shape {subject_logits.shape}")
    p = softmax(subject_logits)
    n = p.shape[0]
    top = p.argmax(axis=1)  # first index on ties
    p_top = p[np.arange(n), top]
    value = float(p_top.mean())
    # d p_top / d z_k = p_top * ([k == top] - p_k)
    grad = -p * p_top[:, None]
    grad[np.arange(n), top] += p_top
    return value, grad / n


@dataclass(frozen=True)
class GanLossWeights:
    """Weights of the auxiliary-class and subject-invariance terms."""

    lambda_a: float = 1.0
    lambda_s: float = 0.3

    def __post_init__(self) -> None:
        for name in ("lambda_a", "lambda_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvariantViolation(f"{name} must be finite and >= 0, got {v}")


def generator_total_loss(
    l_g_adversarial: float,
    l_aux_fake: float,
    l_subject_fake: float,
    weights: GanLossWeights,
) -> float:
    """Combined generator objective: adversarial + weighted auxiliary terms."""
    return l_g_adversarial + weights.lambda_a * l_aux_fake + weights.lambda_s * l_subject_fake
