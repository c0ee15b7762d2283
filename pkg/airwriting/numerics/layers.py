"""Differenzierbare Layer für 1-D-Sequenzmodelle.

Alle Sequenzen haben das Layout (batch, channel, time). Jede Funktion rechnet den
Forward-Pass mit numpy und hängt eine exakte Backward-Regel an das Ergebnis.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from config.settings import LEAKY_SLOPE
from ..exceptions import ShapeError
from .tensor import Tensor

ACTIVATIONS = ("leaky_relu", "linear", "tanh", "sigmoid")


def _node(data: np.ndarray, parents: Sequence[Tensor], op: str,
          backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data, parents, op)
    if out.requires_grad:
        out._backward = backward
    return out


def _send(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor.accumulate(grad)


def conv_output_length(length: int, kernel: int, stride: int, pad: int) -> int:
    return (length + 2 * pad - kernel) // stride + 1


def conv_transpose_output_length(length: int, kernel: int, stride: int, pad: int) -> int:
    return (length - 1) * stride - 2 * pad + kernel


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, kernel: int, stride: int = 1,
           pad: int = 0) -> Tensor:
    """Kanalmischende 1-D-Faltung entlang der Zeit.

    Args:
        x: Eingabe (B, C_in, L).
        weight: Kernel (C_out, C_in, kernel).
        bias: (C_out,).
        kernel: Kernelbreite, muss zur Gewichtsform passen.
        stride: Schrittweite.
        pad: Nullen links und rechts.

    Returns:
        Ausgabe (B, C_out, floor((L + 2·pad − kernel)/stride) + 1).
    """
    batch, c_in, length = x.shape
    c_out, w_in, w_kernel = weight.shape
    if w_in != c_in or w_kernel != kernel:
        raise ShapeError(
            f"conv1d: Gewicht {weight.shape} passt nicht zu C_in={c_in}, kernel={kernel}"
        )
    if kernel < 1 or stride < 1 or length < 1:
        raise ShapeError("conv1d: kernel, stride und L müssen ≥ 1 sein")
    if length + 2 * pad < kernel:
        raise ShapeError(
            f"conv1d: L={length} mit pad={pad} ist kürzer als kernel={kernel}"
        )

    l_out = conv_output_length(length, kernel, stride, pad)
    padded = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    # (B, C_in, L_out, K)
    windows = sliding_window_view(padded, kernel, axis=2)[:, :, ::stride][:, :, :l_out]
    out = np.einsum("bclk,ock->bol", windows, weight.data, optimize=True)
    out += bias.data[None, :, None]

    def backward(grad: np.ndarray) -> None:
        if weight.requires_grad:
            weight.accumulate(np.einsum("bclk,bol->ock", windows, grad, optimize=True))
        if bias.requires_grad:
            bias.accumulate(grad.sum(axis=(0, 2)))
        if x.requires_grad:
            grad_windows = np.einsum("ock,bol->bclk", weight.data, grad, optimize=True)
            grad_padded = np.zeros_like(padded)
            span = stride * (l_out - 1) + 1
            for k in range(kernel):
                grad_padded[:, :, k:k + span:stride] += grad_windows[..., k]
            x.accumulate(grad_padded[:, :, pad:pad + length])

    return _node(out, (x, weight, bias), "conv1d", backward)


def conv1d_transpose(x: Tensor, weight: Tensor, bias: Tensor, kernel: int,
                     stride: int = 1, pad: int = 0) -> Tensor:
    """Transponierte 1-D-Faltung (Adjungierte von :func:`conv1d`).

    Args:
        x: Eingabe (B, C_in, L).
        weight: Kernel (C_in, C_out, kernel).
        bias: (C_out,).

    Returns:
        Ausgabe (B, C_out, (L − 1)·stride − 2·pad + kernel).
    """
    batch, c_in, length = x.shape
    w_in, c_out, w_kernel = weight.shape
    if w_in != c_in or w_kernel != kernel:
        raise ShapeError(
            f"conv1d_transpose: Gewicht {weight.shape} passt nicht zu C_in={c_in}"
        )
    if length < 1:
        raise ShapeError("conv1d_transpose: L muss ≥ 1 sein")
    l_out = conv_transpose_output_length(length, kernel, stride, pad)
    if l_out <= 0:
        raise ShapeError(f"conv1d_transpose: Ausgabelänge {l_out} ist nicht positiv")

    full = np.zeros((batch, c_out, (length - 1) * stride + kernel))
    span = stride * (length - 1) + 1
    for k in range(kernel):
        full[:, :, k:k + span:stride] += np.einsum(
            "bil,io->bol", x.data, weight.data[:, :, k], optimize=True
        )
    out = full[:, :, pad:pad + l_out] + bias.data[None, :, None]

    def backward(grad: np.ndarray) -> None:
        grad_full = np.zeros_like(full)
        grad_full[:, :, pad:pad + l_out] = grad
        if bias.requires_grad:
            bias.accumulate(grad.sum(axis=(0, 2)))
        grad_w = np.zeros_like(weight.data) if weight.requires_grad else None
        grad_x = np.zeros_like(x.data) if x.requires_grad else None
        for k in range(kernel):
            tap = grad_full[:, :, k:k + span:stride]
            if grad_w is not None:
                grad_w[:, :, k] = np.einsum("bil,bol->io", x.data, tap, optimize=True)
            if grad_x is not None:
                grad_x += np.einsum("bol,io->bil", tap, weight.data[:, :, k], optimize=True)
        if grad_w is not None:
            weight.accumulate(grad_w)
        if grad_x is not None:
            x.accumulate(grad_x)

    return _node(out, (x, weight, bias), "conv1d_transpose", backward)


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementweise Aktivierung (leaky_relu mit α=0.2, linear, tanh, sigmoid)."""
    if kind == "linear":
        return x
    if kind == "leaky_relu":
        slope = np.where(x.data > 0, 1.0, LEAKY_SLOPE)
        out = x.data * slope

        def backward(grad: np.ndarray) -> None:
            x.accumulate(grad * slope)
    elif kind == "tanh":
        out = np.tanh(x.data)

        def backward(grad: np.ndarray) -> None:
            x.accumulate(grad * (1.0 - out ** 2))
    elif kind == "sigmoid":
        out = expit(x.data)

        def backward(grad: np.ndarray) -> None:
            x.accumulate(grad * out * (1.0 - out))
    else:
        raise ValueError(f"Unbekannte Aktivierung: {kind}")
    return _node(out, (x,), kind, backward)


def leaky_relu(x: Tensor) -> Tensor:
    return activation(x, "leaky_relu")


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """y = x Wᵀ + b für x (B, n), W (m, n)."""
    if x.data.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"affine: Eingabe {x.shape} passt nicht zu Gewicht {weight.shape}")
    out = x.data @ weight.data.T + bias.data

    def backward(grad: np.ndarray) -> None:
        _send(weight, grad.T @ x.data)
        _send(bias, grad.sum(axis=0))
        _send(x, grad @ weight.data)

    return _node(out, (x, weight, bias), "affine", backward)


def affine_act(x: Tensor, weight: Tensor, bias: Tensor, kind: str = "linear") -> Tensor:
    """Affine Abbildung gefolgt von einer Aktivierung."""
    if kind not in ACTIVATIONS:
        raise ValueError(f"Unbekannte Aktivierung: {kind}")
    return activation(affine(x, weight, bias), kind)


def gru_forward(x: Tensor, w: Tensor, u: Tensor, b: Tensor,
                h0: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
    """Einschichtiges GRU über die Zeitachse.

    Pro Schritt: z=σ(W_z x+U_z h+b_z), r=σ(W_r x+U_r h+b_r),
    ñ=tanh(W_n x+U_n(r∘h)+b_n), h'=(1−z)∘h+z∘ñ.

    Args:
        x: Eingabe (B, I, T).
        w: (3H, I), Gate-Blöcke in der Reihenfolge z, r, n.
        u: (3H, H).
        b: (3H,).
        h0: Startzustand (B, H); ``None`` bedeutet Nullzustand.

    Returns:
        Alle verborgenen Zustände (B, H, T) und den letzten Zustand (B, H).
    """
    batch, n_in, steps = x.shape
    hidden = u.shape[1]
    if w.shape != (3 * hidden, n_in) or u.shape != (3 * hidden, hidden) or b.shape != (3 * hidden,):
        raise ShapeError(
            f"gru: Gewichte {w.shape}/{u.shape}/{b.shape} passen nicht zu I={n_in}, H={hidden}"
        )
    if h0 is None:
        h0 = Tensor(np.zeros((batch, hidden)))
    if h0.shape != (batch, hidden):
        raise ShapeError(f"gru: h0 {h0.shape} erwartet ({batch}, {hidden})")

    u_zr, u_n = u.data[:2 * hidden], u.data[2 * hidden:]
    inputs = np.transpose(x.data, (0, 2, 1))               # (B, T, I)
    projected = inputs @ w.data.T + b.data                 # (B, T, 3H)

    states = np.empty((batch, steps + 1, hidden))
    states[:, 0] = h0.data
    gates_z = np.empty((batch, steps, hidden))
    gates_r = np.empty((batch, steps, hidden))
    cands = np.empty((batch, steps, hidden))
    for t in range(steps):
        h = states[:, t]
        zr = expit(projected[:, t, :2 * hidden] + h @ u_zr.T)
        z, r = zr[:, :hidden], zr[:, hidden:]
        n = np.tanh(projected[:, t, 2 * hidden:] + (r * h) @ u_n.T)
        states[:, t + 1] = (1.0 - z) * h + z * n
        gates_z[:, t], gates_r[:, t], cands[:, t] = z, r, n

    seq_data = np.transpose(states[:, 1:], (0, 2, 1))      # (B, H, T)

    def backward(grad_seq: np.ndarray) -> None:
        grad_out = np.transpose(grad_seq, (0, 2, 1))       # (B, T, H)
        grad_proj = np.zeros((batch, steps, 3 * hidden))
        grad_u = np.zeros_like(u.data)
        dh = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            dh = dh + grad_out[:, t]
            h = states[:, t]
            z, r, n = gates_z[:, t], gates_r[:, t], cands[:, t]
            dz = dh * (n - h)
            da_n = dh * z * (1.0 - n ** 2)
            dh_prev = dh * (1.0 - z)
            d_rh = da_n @ u_n
            da_r = d_rh * h * r * (1.0 - r)
            dh_prev += d_rh * r
            da_z = dz * z * (1.0 - z)
            da_zr = np.concatenate([da_z, da_r], axis=1)
            dh_prev += da_zr @ u_zr
            grad_u[:2 * hidden] += da_zr.T @ h
            grad_u[2 * hidden:] += da_n.T @ (r * h)
            grad_proj[:, t, :2 * hidden] = da_zr
            grad_proj[:, t, 2 * hidden:] = da_n
            dh = dh_prev
        flat_grad = grad_proj.reshape(-1, 3 * hidden)
        _send(w, flat_grad.T @ inputs.reshape(-1, n_in))
        _send(u, grad_u)
        _send(b, flat_grad.sum(axis=0))
        _send(x, np.transpose(grad_proj @ w.data, (0, 2, 1)))
        _send(h0, dh)

    seq = _node(seq_data, (x, w, u, b, h0), "gru", backward)
    if steps == 0:
        return seq, h0
    return seq, select_time(seq, np.full(batch, steps - 1))


def select_time(x: Tensor, index: np.ndarray) -> Tensor:
    """Zeitschritt ``index[i]`` für jede Probe i: (B, C, T) → (B, C)."""
    index = np.asarray(index, dtype=int)
    rows = np.arange(x.shape[0])
    out = x.data[rows, :, index]

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[rows, :, index] = grad
        x.accumulate(full)

    return _node(out, (x,), "select_time", backward)


def repeat_time(x: Tensor, steps: int) -> Tensor:
    """Kopiert einen Vektor (B, C) ``steps`` Mal entlang der Zeit: (B, C, steps)."""
    out = np.repeat(x.data[:, :, None], steps, axis=2)

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad.sum(axis=2))

    return _node(out, (x,), "repeat_time", backward)


def apply_mask(x: Tensor, mask: np.ndarray) -> Tensor:
    """Setzt Zeitschritte außerhalb der Maske (B, T) auf null."""
    weights = np.asarray(mask, dtype=np.float64)[:, None, :]
    out = x.data * weights

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad * weights)

    return _node(out, (x,), "mask", backward)


def crop_time(x: Tensor, length: int) -> Tensor:
    """Behält die ersten ``length`` Zeitschritte."""
    out = x.data[:, :, :length]

    def backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[:, :, :length] = grad
        x.accumulate(full)

    return _node(out, (x,), "crop_time", backward)


def masked_mean_time(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mittelwert über gültige Zeitschritte: (B, C, T) → (B, C)."""
    weights = np.asarray(mask, dtype=np.float64)
    counts = np.maximum(weights.sum(axis=1, keepdims=True), 1.0)
    scale = (weights / counts)[:, None, :]
    out = (x.data * scale).sum(axis=2)

    def backward(grad: np.ndarray) -> None:
        x.accumulate(grad[:, :, None] * scale)

    return _node(out, (x,), "masked_mean_time", backward)


def concat_features(parts: Sequence[Tensor]) -> Tensor:
    """Verkettet (B, n_i)-Merkmale entlang der Merkmalsachse."""
    sizes = [p.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    bounds = np.cumsum([0] + sizes)

    def backward(grad: np.ndarray) -> None:
        for part, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _send(part, grad[:, lo:hi])

    return _node(out, tuple(parts), "concat", backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(grad: np.ndarray) -> None:
        _send(a, grad)
        _send(b, grad)

    return _node(out, (a, b), "add", backward)
