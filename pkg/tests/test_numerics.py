"""Tests für den numerischen Kern: Layer, Verluste, Adam und Gradientenprüfung."""

import math

import numpy as np
import pytest

from airwriting.exceptions import NumericalError, ShapeError
from airwriting.numerics import gradcheck, layers, losses
from airwriting.numerics.gradcheck import GRADCHECK_TOLERANCE, GRADIENT_SUITE, grad_check
from airwriting.numerics.optim import Adam
from airwriting.numerics.tensor import ParamBlock, Tensor, check_finite


def _naive_conv1d(x, w, b, stride, pad):
    batch, c_in, length = x.shape
    c_out, _, kernel = w.shape
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    l_out = (length + 2 * pad - kernel) // stride + 1
    out = np.zeros((batch, c_out, l_out))
    for n in range(batch):
        for o in range(c_out):
            for l in range(l_out):
                window = padded[n, :, l * stride:l * stride + kernel]
                out[n, o, l] = np.sum(window * w[o]) + b[o]
    return out


@pytest.mark.parametrize("name", sorted(GRADIENT_SUITE))
def test_gradient_suite(name):
    """Jede differenzierbare Operation besteht die Differenzenprüfung."""
    rng = np.random.default_rng([0, sorted(GRADIENT_SUITE).index(name)])
    closure, params = GRADIENT_SUITE[name](rng)
    error = grad_check(closure, params)
    assert error < GRADCHECK_TOLERANCE, f"{name}: rel. Fehler {error:.2e}"


def test_gradcheck_detects_sign_error(monkeypatch):
    """Ein Vorzeichenfehler in einer Backward-Regel fällt auf."""
    original = layers.conv1d

    def broken(*args, **kwargs):
        out = original(*args, **kwargs)
        backward = out._backward
        out._backward = lambda grad: backward(-grad)
        return out

    monkeypatch.setattr(layers, "conv1d", broken)
    closure, params = GRADIENT_SUITE["conv1d"](np.random.default_rng(3))
    assert grad_check(closure, params) > GRADCHECK_TOLERANCE


def test_run_gradient_suite_reports_every_case():
    results = gradcheck.run_gradient_suite(seed=0)
    assert [r.name for r in results] == list(GRADIENT_SUITE)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_conv1d_matches_loop(rng):
    """Faltung stimmt mit einer expliziten Schleife überein."""
    x = rng.normal(size=(2, 3, 11))
    w = rng.normal(size=(4, 3, 5))
    b = rng.normal(size=4)
    out = layers.conv1d(Tensor(x), Tensor(w), Tensor(b), 5, 2, 2)
    np.testing.assert_allclose(out.data, _naive_conv1d(x, w, b, 2, 2), atol=1e-12)


def test_conv1d_transpose_is_adjoint(rng):
    """⟨conv(x), y⟩ = ⟨x, conv_transpose(y)⟩ bei Bias null."""
    w = rng.normal(size=(4, 3, 4))
    zero_out, zero_in = Tensor(np.zeros(4)), Tensor(np.zeros(3))
    x = rng.normal(size=(2, 3, 12))
    y = rng.normal(size=(2, 4, 6))
    forward = layers.conv1d(Tensor(x), Tensor(w), zero_out, 4, 2, 1).data
    backward = layers.conv1d_transpose(Tensor(y), Tensor(w), zero_in, 4, 2, 1).data
    assert forward.shape == y.shape
    assert backward.shape == x.shape
    assert np.sum(forward * y) == pytest.approx(np.sum(x * backward), rel=1e-10)


def test_output_lengths():
    assert layers.conv_output_length(120, 7, 2, 3) == 60
    assert layers.conv_output_length(121, 7, 2, 3) == 61
    assert layers.conv_transpose_output_length(15, 4, 2, 1) == 30


def test_conv1d_too_short_input(rng):
    x = Tensor(rng.normal(size=(1, 2, 2)))
    with pytest.raises(ShapeError):
        layers.conv1d(x, Tensor(rng.normal(size=(3, 2, 7))), Tensor(np.zeros(3)), 7, 1, 0)


def test_conv1d_kernel_mismatch(rng):
    x = Tensor(rng.normal(size=(1, 2, 10)))
    with pytest.raises(ShapeError):
        layers.conv1d(x, Tensor(rng.normal(size=(3, 2, 5))), Tensor(np.zeros(3)), 3)


def test_gru_zero_steps_returns_initial_state(rng):
    h0 = Tensor(rng.normal(size=(2, 4)))
    seq, last = layers.gru_forward(
        Tensor(np.zeros((2, 3, 0))), Tensor(np.zeros((12, 3))), Tensor(np.zeros((12, 4))),
        Tensor(np.zeros(12)), h0,
    )
    assert seq.shape == (2, 4, 0)
    np.testing.assert_array_equal(last.data, h0.data)


def test_gru_zero_input_gate_keeps_state(rng):
    """Mit z ≈ 0 (stark negativer Bias) bleibt der Zustand erhalten."""
    hidden = 3
    b = np.zeros(3 * hidden)
    b[:hidden] = -50.0
    h0 = rng.normal(size=(1, hidden))
    _, last = layers.gru_forward(
        Tensor(rng.normal(size=(1, 2, 5))), Tensor(rng.normal(size=(9, 2))),
        Tensor(rng.normal(size=(9, hidden))), Tensor(b), Tensor(h0),
    )
    np.testing.assert_allclose(last.data, h0, atol=1e-12)


def test_leaky_relu_values():
    out = layers.activation(Tensor(np.array([-2.0, 0.0, 3.0])), "leaky_relu")
    np.testing.assert_allclose(out.data, [-0.4, 0.0, 3.0])


def test_unknown_activation():
    with pytest.raises(ValueError):
        layers.activation(Tensor(np.zeros(2)), "relu6")


@pytest.mark.parametrize("classes", [2, 5, 20])
def test_uniform_logits_cross_entropy(classes):
    """Gleichverteilte Logits ergeben genau ln K."""
    loss = losses.softmax_xent(Tensor(np.zeros((4, classes))), np.arange(4) % classes)
    assert loss.item() == pytest.approx(math.log(classes), abs=1e-6)


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        losses.softmax_xent(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_lsgan_equilibrium():
    """Konstante Scores 0.5 ergeben d_loss = 0.5."""
    scores = Tensor(np.full((3, 64), 0.5))
    d_loss, g_loss = losses.lsgan_losses(scores, scores)
    assert d_loss.item() == pytest.approx(0.5, abs=1e-9)
    assert g_loss.item() == pytest.approx(0.5, abs=1e-9)


def test_lsgan_targets():
    """Inertial-Scores 1 und Trajektorien-Scores 0 sind für D optimal."""
    d_loss, g_loss = losses.lsgan_losses(Tensor(np.ones((2, 4))), Tensor(np.zeros((2, 4))))
    assert d_loss.item() == 0.0
    assert g_loss.item() == pytest.approx(2.0)


def test_l1_identical_is_zero(rng):
    a = rng.normal(size=(2, 3, 8))
    mask = np.ones((2, 8), dtype=bool)
    assert losses.l1_loss(Tensor(a), Tensor(a.copy()), mask).item() == 0.0


def test_l1_ignores_masked_steps(rng):
    a = rng.normal(size=(1, 2, 6))
    b = a.copy()
    b[:, :, 4:] += 100.0
    mask = np.array([[True] * 4 + [False] * 2])
    assert losses.l1_loss(Tensor(a), Tensor(b), mask).item() == 0.0


def test_l1_empty_mask(rng):
    a = Tensor(rng.normal(size=(1, 2, 4)))
    with pytest.raises(ValueError):
        losses.l1_loss(a, a, np.zeros((1, 4), dtype=bool))


def test_backward_requires_scalar(rng):
    x = ParamBlock("x", rng.normal(size=3))
    with pytest.raises(ShapeError):
        layers.activation(x, "tanh").backward()


def test_adam_first_step_and_grad_reset():
    """Erster Schritt bewegt jeden Parameter um ≈ lr gegen das Gradientenvorzeichen."""
    block = ParamBlock("w", np.array([1.0, -1.0, 0.5]))
    block.grad = np.array([0.3, -2.0, 1e-3])
    Adam(lr=0.01).step([block])
    np.testing.assert_allclose(block.data, [0.99, -0.99, 0.49], atol=1e-6)
    assert block.adam_t == 1
    np.testing.assert_array_equal(block.grad, np.zeros(3))


def test_adam_is_deterministic():
    def run():
        block = ParamBlock("w", np.linspace(-1, 1, 5))
        opt = Adam()
        for step in range(10):
            block.grad = np.sin(block.data * (step + 1))
            opt.step([block])
        return block.data
    np.testing.assert_array_equal(run(), run())


def test_param_block_uniform_bounds(rng):
    block = ParamBlock.uniform("w", (50, 4), fan_in=4, rng=rng)
    assert np.all(np.abs(block.data) <= 0.5)
    assert block.grad.shape == (50, 4)


def test_adam_zero_gradient_keeps_weights():
    block = ParamBlock("w", np.array([0.3, -0.7]))
    Adam(lr=0.1).step([block])
    np.testing.assert_array_equal(block.data, [0.3, -0.7])


def test_adam_matches_scalar_trace():
    """Drei Schritte gegen eine handgerechnete skalare Adam-Spur."""
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    grads = [0.5, -1.5, 2.0]
    w, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)

    block = ParamBlock("w", np.array([1.0]))
    opt = Adam(lr=lr)
    for g in grads:
        block.grad = np.array([g])
        opt.step([block])
    assert block.data[0] == pytest.approx(w, abs=1e-10)


def test_grad_check_linear_closure(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    weights = rng.uniform(0.5, 2.0, size=(3, 4)) * rng.choice([-1.0, 1.0], size=(3, 4))
    assert grad_check(lambda: gradcheck.project(x, weights), [x]) < 1e-8


@pytest.mark.parametrize("length", [16, 30, 64])
def test_stride_two_roundtrip_length(length):
    """Faltung k4/s2/p1 und passende Transponierte erhalten gerade Längen."""
    half = layers.conv_output_length(length, 4, 2, 1)
    assert layers.conv_transpose_output_length(half, 4, 2, 1) == length


def test_adam_slots_keep_separate_moments():
    """Zwei Optimierer auf demselben Block führen getrennte Momente."""
    block = ParamBlock("w", np.array([1.0]))
    rec, gen = Adam(lr=0.01, slot="rec"), Adam(lr=0.01, slot="gen")
    block.grad = np.array([100.0])
    rec.step([block])
    block.grad = np.array([0.01])
    gen.step([block])
    # der kleine Gradient erhält trotzdem einen vollen ersten Schritt
    assert block.data[0] == pytest.approx(1.0 - 0.02, abs=1e-6)
    assert block.moments["rec"].t == 1 and block.moments["gen"].t == 1
    assert block.adam_t == 0


def test_check_finite_on_gradients():
    blocks = [ParamBlock("a", np.zeros(2)), ParamBlock("b", np.zeros(3))]
    check_finite(blocks, "test")
    blocks[1].grad[2] = np.inf
    with pytest.raises(NumericalError, match="b"):
        check_finite(blocks, "test")
