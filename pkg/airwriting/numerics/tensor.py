"""Reverse-mode Autodiff-Kern.

Ein :class:`Tensor` kennt seine Eltern und eine Backward-Closure. Der Aufruf von
:meth:`Tensor.backward` auf einem Skalar läuft in umgekehrter topologischer
Reihenfolge durch den Graphen und akkumuliert die Gradienten in ``grad``.
Alle Werte sind float64.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import NumericalError, ShapeError

DEFAULT_SLOT = "adam"


class Tensor:
    """Knoten im Berechnungsgraphen.

    Args:
        data: Werte des Knotens.
        parents: Eingänge, aus denen der Knoten berechnet wurde.
        op: Name der erzeugenden Operation (nur für Debugging).
    """

    def __init__(self, data, parents: Sequence["Tensor"] = (), op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple[Tensor, ...] = tuple(parents)
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.op = op
        self.requires_grad = any(p.requires_grad for p in self._parents)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Kopie ohne Verbindung zum Graphen."""
        return Tensor(self.data.copy())

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ShapeError(
                f"Gradient {grad.shape} passt nicht zu {self.data.shape} ({self.op})"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Backpropagation ab diesem Knoten."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() ohne Gradient nur für Skalare")
            grad = np.ones_like(self.data)

        order = _topological_order(self)
        self.accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)
            # Zwischenergebnisse freigeben, Blätter behalten ihren Gradienten
            if node._parents:
                node.grad = None


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


class AdamMoments:
    """Adam-Momente eines Blocks für genau einen Optimierer."""

    __slots__ = ("m", "v", "t")

    def __init__(self, m: np.ndarray, v: np.ndarray, t: int = 0):
        self.m = m
        self.v = v
        self.t = t


class ParamBlock(Tensor):
    """Trainierbares Gewicht samt Adam-Zustand.

    Jeder Optimierer führt eigene Momente unter seinem Slot-Namen, damit
    Rekonstruktions-, Klassifikations- und Adversarial-Schritte ihre
    Schrittweiten getrennt normieren. ``adam_m``, ``adam_v`` und ``adam_t``
    sprechen den Standard-Slot an.

    Attributes:
        name: Eindeutiger Name innerhalb einer Parametergruppe.
        grad: Gradientenakkumulator, gleiche Form wie die Gewichte.
        moments: Slot-Name → :class:`AdamMoments`.
    """

    def __init__(self, name: str, weights: np.ndarray):
        super().__init__(weights, op="param")
        self.name = name
        self.requires_grad = True
        self.grad = np.zeros_like(self.data)
        self.moments: Dict[str, AdamMoments] = {}

    def moments_for(self, slot: str = DEFAULT_SLOT) -> AdamMoments:
        if slot not in self.moments:
            self.moments[slot] = AdamMoments(np.zeros_like(self.data), np.zeros_like(self.data))
        return self.moments[slot]

    @property
    def adam_m(self) -> np.ndarray:
        return self.moments_for().m

    @property
    def adam_v(self) -> np.ndarray:
        return self.moments_for().v

    @property
    def adam_t(self) -> int:
        return self.moments_for().t

    @property
    def weights(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"ParamBlock({self.name!r}, shape={self.shape})"

    @classmethod
    def uniform(
        cls,
        name: str,
        shape: Tuple[int, ...],
        fan_in: int,
        rng: np.random.Generator,
    ) -> "ParamBlock":
        """Initialisierung gleichverteilt in ±sqrt(1/fan_in)."""
        bound = np.sqrt(1.0 / max(fan_in, 1))
        return cls(name, rng.uniform(-bound, bound, size=shape))


def zero_grads(blocks: Iterable[ParamBlock]) -> None:
    for block in blocks:
        block.zero_grad()


def check_finite(blocks: Iterable[ParamBlock], where: str) -> None:
    """Wirft :class:`NumericalError`, sobald ein Gradient NaN/Inf enthält."""
    for block in blocks:
        if not np.all(np.isfinite(block.grad)):
            raise NumericalError(f"Nicht-endlicher Gradient in {where}: {block.name}")
