"""Verlustfunktionen: Kreuzentropie, maskierte L1-Norm und LSGAN."""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from ..exceptions import ShapeError
from .layers import _node, add
from .tensor import Tensor


def softmax_xent(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mittlere Kreuzentropie −log softmax(logits)[label] über den Batch."""
    labels = np.asarray(labels, dtype=int)
    batch, classes = logits.shape
    if classes < 2:
        raise ShapeError("softmax_xent: mindestens zwei Klassen erforderlich")
    if labels.shape != (batch,):
        raise ShapeError(f"softmax_xent: {labels.shape} Labels für Batch {batch}")
    if np.any(labels < 0) or np.any(labels >= classes):
        raise ValueError(f"softmax_xent: Label außerhalb von [0, {classes})")

    rows = np.arange(batch)
    log_probs = log_softmax(logits.data, axis=1)
    loss = -log_probs[rows, labels].mean()

    def backward(grad: np.ndarray) -> None:
        delta = softmax(logits.data, axis=1)
        delta[rows, labels] -= 1.0
        logits.accumulate(grad * delta / batch)

    return _node(np.asarray(loss), (logits,), "softmax_xent", backward)


def l1_loss(a: Tensor, b: Tensor, mask: np.ndarray) -> Tensor:
    """Mittlere absolute Abweichung über gültige Elemente.

    Args:
        a, b: (B, C, L).
        mask: (B, L), True für gültige Zeitschritte.
    """
    if a.shape != b.shape:
        raise ShapeError(f"l1_loss: {a.shape} != {b.shape}")
    weights = np.asarray(mask, dtype=np.float64)
    if weights.shape != (a.shape[0], a.shape[2]):
        raise ShapeError(f"l1_loss: Maske {weights.shape} passt nicht zu {a.shape}")
    count = weights.sum() * a.shape[1]
    if count == 0:
        raise ValueError("l1_loss: Maske enthält keine gültigen Elemente")

    diff = a.data - b.data
    weights = weights[:, None, :]
    loss = (np.abs(diff) * weights).sum() / count

    def backward(grad: np.ndarray) -> None:
        # np.sign(0) == 0: Subgradient 0 bei Gleichheit
        local = np.sign(diff) * weights / count * grad
        if a.requires_grad:
            a.accumulate(local)
        if b.requires_grad:
            b.accumulate(-local)

    return _node(np.asarray(loss), (a, b), "l1_loss", backward)


def squared_error_to(scores: Tensor, target: float) -> Tensor:
    """Mittel von (s − target)² über alle Elemente."""
    diff = scores.data - target
    loss = np.mean(diff ** 2)

    def backward(grad: np.ndarray) -> None:
        scores.accumulate(grad * 2.0 * diff / diff.size)

    return _node(np.asarray(loss), (scores,), "squared_error", backward)


def lsgan_losses(scores_inertia: Tensor, scores_trajectory: Tensor) -> Tuple[Tensor, Tensor]:
    """Least-Squares-Verluste des latenten Diskriminators.

    Inertiale Latents tragen das Ziel 1, Trajektorien-Latents das Ziel 0. Die
    64 Ausgaben pro Probe gehen einzeln in das Mittel ein ("Voting").

    Returns:
        (d_loss, g_loss); der Generatorverlust vertauscht die Ziele pro Domäne.
    """
    d_loss = add(squared_error_to(scores_inertia, 1.0), squared_error_to(scores_trajectory, 0.0))
    g_loss = add(squared_error_to(scores_inertia, 0.0), squared_error_to(scores_trajectory, 1.0))
    return d_loss, g_loss
