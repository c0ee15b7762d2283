"""Gradientenprüfung per zentraler Differenz und die Prüfsuite des Kerns."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import layers, losses
from .tensor import Tensor

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4
# Verfeinerung bei Knicken (leaky-ReLU, |·|) innerhalb von ±delta
REFINE_FACTOR = 1e-2


def _central_difference(closure: Callable[[], Tensor], flat: np.ndarray, j: int,
                        delta: float) -> float:
    original = flat[j]
    flat[j] = original + delta
    upper = closure().item()
    flat[j] = original - delta
    lower = closure().item()
    flat[j] = original
    return (upper - lower) / (2.0 * delta)


def _relative_error(exact: float, numeric: float) -> float:
    return abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)


def grad_check(closure: Callable[[], Tensor], params: Sequence[Tensor], delta: float = 1e-4,
               samples: int = 200, seed: int = 0) -> float:
    """Vergleicht analytische mit numerischen Gradienten.

    Liegt ein Knick der Aktivierung im Intervall ±delta, wird die Koordinate mit
    delta·1e-2 erneut geschätzt und der kleinere Fehler gewertet.

    Args:
        closure: Deterministische Funktion, die einen skalaren Tensor liefert.
        params: Blätter, deren Gradienten geprüft werden.
        delta: Schrittweite der zentralen Differenz.
        samples: Anzahl zufällig gezogener Koordinaten (alle, falls weniger).
        seed: Seed für die Koordinatenauswahl.

    Returns:
        Maximaler relativer Fehler mit Nenner max(|g_a|, |g_n|, 1e-8).
    """
    for p in params:
        p.requires_grad = True
        p.grad = np.zeros_like(p.data)
    closure().backward()
    analytic = [p.grad.copy() for p in params]

    coords = [(i, j) for i, p in enumerate(params) for j in range(p.data.size)]
    rng = np.random.default_rng(seed)
    if len(coords) > samples:
        picked = rng.choice(len(coords), size=samples, replace=False)
        coords = [coords[k] for k in sorted(picked)]

    worst = 0.0
    for i, j in coords:
        flat = params[i].data.reshape(-1)
        exact = analytic[i].reshape(-1)[j]
        error = _relative_error(exact, _central_difference(closure, flat, j, delta))
        if error > GRADCHECK_TOLERANCE * 0.1:
            refined = _central_difference(closure, flat, j, delta * REFINE_FACTOR)
            error = min(error, _relative_error(exact, refined))
        worst = max(worst, error)
    return worst


def project(x: Tensor, weights: np.ndarray) -> Tensor:
    """Skalar ⟨x, weights⟩; macht aus beliebigen Ausgaben eine Prüfgröße."""
    out = np.sum(x.data * weights)

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad * weights)

    return layers._node(np.asarray(out), (x,), "project", backward)


def _leaf(rng: np.random.Generator, *shape: int, scale: float = 1.0) -> Tensor:
    t = Tensor(rng.normal(scale=scale, size=shape))
    t.requires_grad = True
    return t


@dataclass
class GradCheckResult:
    name: str
    error: float

    @property
    def passed(self) -> bool:
        return self.error < GRADCHECK_TOLERANCE


def _case_conv1d(rng):
    x, w, b = _leaf(rng, 2, 3, 12), _leaf(rng, 4, 3, 5, scale=0.5), _leaf(rng, 4)
    target = rng.normal(size=(2, 4, 5))
    return lambda: project(layers.conv1d(x, w, b, 5, 2, 1), target), [x, w, b]


def _case_conv1d_transpose(rng):
    x, w, b = _leaf(rng, 2, 3, 6), _leaf(rng, 3, 4, 4, scale=0.5), _leaf(rng, 4)
    target = rng.normal(size=(2, 4, 12))
    return lambda: project(layers.conv1d_transpose(x, w, b, 4, 2, 1), target), [x, w, b]


def _case_gru(rng):
    hidden = 4
    x = _leaf(rng, 2, 3, 2)
    w, u = _leaf(rng, 3 * hidden, 3, scale=0.5), _leaf(rng, 3 * hidden, hidden, scale=0.5)
    b, h0 = _leaf(rng, 3 * hidden, scale=0.5), _leaf(rng, 2, hidden, scale=0.5)
    target = rng.normal(size=(2, hidden, 2))

    def closure():
        seq, last = layers.gru_forward(x, w, u, b, h0)
        return layers.add(project(seq, target), project(last, target[:, :, 0]))
    return closure, [x, w, u, b, h0]


def _case_affine(kind):
    def build(rng):
        x, w, b = _leaf(rng, 2, 4), _leaf(rng, 3, 4), _leaf(rng, 3)
        target = rng.normal(size=(2, 3))
        return lambda: project(layers.affine_act(x, w, b, kind), target), [x, w, b]
    return build


def _case_softmax_xent(rng):
    logits = _leaf(rng, 2, 5)
    labels = np.array([1, 4])
    return lambda: losses.softmax_xent(logits, labels), [logits]


def _case_l1(rng):
    a, b = _leaf(rng, 2, 3, 6), _leaf(rng, 2, 3, 6)
    mask = np.ones((2, 6), dtype=bool)
    mask[1, 4:] = False
    return lambda: losses.l1_loss(a, b, mask), [a, b]


def _case_lsgan(rng):
    s_i, s_t = _leaf(rng, 2, 4), _leaf(rng, 2, 4)

    def closure():
        d_loss, g_loss = losses.lsgan_losses(s_i, s_t)
        return layers.add(d_loss, g_loss)
    return closure, [s_i, s_t]


def _case_encoder(rng):
    from ..model import init_model, reconstruct_batch
    from ..training import pad_and_mask
    from .. import data

    params = init_model(class_count=3, seed=int(rng.integers(1 << 31)))
    samples = [
        data.Sample(f"s{i}", "inertia", i, 60.0, rng.normal(size=(6, length)))
        for i, length in enumerate((24, 16))
    ]
    batch = pad_and_mask(samples)
    blocks = list(params.groups["enc_inertia"].values())

    def closure():
        recon = reconstruct_batch(params, batch)
        return losses.l1_loss(recon, Tensor(batch.values), batch.mask)
    return closure, blocks


def _case_discriminator(rng):
    from ..model import discriminate_latent, init_model

    params = init_model(class_count=3, seed=int(rng.integers(1 << 31)))
    latents_i, latents_t = _leaf(rng, 2, 64), _leaf(rng, 2, 64)
    blocks = list(params.groups["disc"].values())

    def closure():
        d_loss, _ = losses.lsgan_losses(
            discriminate_latent(params, latents_i), discriminate_latent(params, latents_t)
        )
        return d_loss
    return closure, blocks + [latents_i, latents_t]


GRADIENT_SUITE: Dict[str, Callable] = {
    "conv1d": _case_conv1d,
    "conv1d_transpose": _case_conv1d_transpose,
    "gru_forward": _case_gru,
    "affine_act[leaky_relu]": _case_affine("leaky_relu"),
    "affine_act[linear]": _case_affine("linear"),
    "affine_act[tanh]": _case_affine("tanh"),
    "affine_act[sigmoid]": _case_affine("sigmoid"),
    "softmax_xent": _case_softmax_xent,
    "l1_loss": _case_l1,
    "lsgan_losses": _case_lsgan,
    "encoder+l1": _case_encoder,
    "discriminator": _case_discriminator,
}


def run_gradient_suite(seed: int = 0) -> List[GradCheckResult]:
    """Führt alle Gradientenprüfungen aus und protokolliert das Ergebnis."""
    results = []
    for offset, (name, build) in enumerate(GRADIENT_SUITE.items()):
        rng = np.random.default_rng([seed, offset])
        closure, params = build(rng)
        error = grad_check(closure, params, seed=seed + offset)
        result = GradCheckResult(name, error)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"Gradientenprüfung {name}: max. rel. Fehler {error:.2e}")
        results.append(result)
    return results
