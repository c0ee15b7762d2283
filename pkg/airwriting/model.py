"""Der Air-Writing Translater: zwei Autoencoder mit gemeinsamem latenten Raum.

Pro Domäne gibt es einen Encoder (drei Faltungen mit Schrittweite 2 und ein
GRU) und einen Decoder (GRU über den wiederholten Latent-Vektor, drei
transponierte Faltungen, Glättungsfaltung). Klassifikator und Diskriminator
arbeiten auf dem 64-dimensionalen Latent-Vektor beider Domänen.
"""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import joblib
import numpy as np
from scipy.special import softmax

from config.settings import (
    CHANNELS,
    DECODER_LAYERS,
    DEFAULT_DURATION_POLICY,
    DISC_HIDDEN,
    DISC_OUTPUTS,
    DOMAINS,
    DURATION_POLICIES,
    ENCODER_LAYERS,
    INERTIA,
    LATENT_DIM,
    RATES_HZ,
    SMOOTHING_KERNEL,
    TRAJECTORY,
    UPSAMPLING_FACTOR,
)
from .data import ChannelStats, Sample
from .exceptions import DatasetError, ShapeError
from .numerics import layers
from .numerics.tensor import AdamMoments, ParamBlock, Tensor

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "airwriting-checkpoint"
CHECKPOINT_VERSION = 2

GROUPS = ("enc_inertia", "dec_inertia", "enc_trajectory", "dec_trajectory", "cls", "disc")


def other_domain(domain: str) -> str:
    return TRAJECTORY if domain == INERTIA else INERTIA


@dataclass
class ModelConfig:
    """Architektur-Schnappschuss, der mit jedem Checkpoint gespeichert wird."""

    class_count: int
    latent_dim: int = LATENT_DIM
    encoder_layers: Tuple[Tuple[int, int, int, int], ...] = ENCODER_LAYERS
    decoder_layers: Tuple[Tuple[Optional[int], int, int, int], ...] = DECODER_LAYERS
    smoothing_kernel: int = SMOOTHING_KERNEL
    disc_hidden: int = DISC_HIDDEN
    disc_outputs: int = DISC_OUTPUTS

    def to_dict(self) -> Dict:
        payload = asdict(self)
        payload["encoder_layers"] = [list(layer) for layer in self.encoder_layers]
        payload["decoder_layers"] = [list(layer) for layer in self.decoder_layers]
        return payload

    @classmethod
    def from_dict(cls, payload: Dict) -> "ModelConfig":
        payload = dict(payload)
        payload["encoder_layers"] = tuple(tuple(layer) for layer in payload["encoder_layers"])
        payload["decoder_layers"] = tuple(tuple(layer) for layer in payload["decoder_layers"])
        return cls(**payload)


@dataclass
class ModelParams:
    """Alle Parameterblöcke, gruppiert nach Teilnetz."""

    config: ModelConfig
    seed: int
    groups: Dict[str, Dict[str, ParamBlock]] = field(default_factory=dict)

    @property
    def class_count(self) -> int:
        return self.config.class_count

    def blocks(self, *names: str) -> List[ParamBlock]:
        return [block for name in names for block in self.groups[name].values()]

    def all_blocks(self) -> List[ParamBlock]:
        return self.blocks(*GROUPS)

    def parameter_count(self) -> int:
        return sum(block.data.size for block in self.all_blocks())


# ----------------------------------------------------------------------
# Initialisierung

def _conv_pair(prefix: str, c_out: int, c_in: int, kernel: int,
               rng: np.random.Generator) -> Dict[str, ParamBlock]:
    fan_in = c_in * kernel
    return {
        f"{prefix}_w": ParamBlock.uniform(f"{prefix}_w", (c_out, c_in, kernel), fan_in, rng),
        f"{prefix}_b": ParamBlock.uniform(f"{prefix}_b", (c_out,), fan_in, rng),
    }


def _gru_blocks(prefix: str, n_in: int, hidden: int,
                rng: np.random.Generator) -> Dict[str, ParamBlock]:
    return {
        f"{prefix}_w": ParamBlock.uniform(f"{prefix}_w", (3 * hidden, n_in), hidden, rng),
        f"{prefix}_u": ParamBlock.uniform(f"{prefix}_u", (3 * hidden, hidden), hidden, rng),
        f"{prefix}_b": ParamBlock.uniform(f"{prefix}_b", (3 * hidden,), hidden, rng),
    }


def _affine_pair(prefix: str, n_out: int, n_in: int,
                 rng: np.random.Generator) -> Dict[str, ParamBlock]:
    return {
        f"{prefix}_w": ParamBlock.uniform(f"{prefix}_w", (n_out, n_in), n_in, rng),
        f"{prefix}_b": ParamBlock.uniform(f"{prefix}_b", (n_out,), n_in, rng),
    }


def _encoder(config: ModelConfig, channels: int, rng: np.random.Generator) -> Dict[str, ParamBlock]:
    blocks: Dict[str, ParamBlock] = {}
    c_in = channels
    for i, (c_out, kernel, _, _) in enumerate(config.encoder_layers):
        blocks.update(_conv_pair(f"conv{i}", c_out, c_in, kernel, rng))
        c_in = c_out
    blocks.update(_gru_blocks("gru", c_in, config.latent_dim, rng))
    return blocks


def _decoder(config: ModelConfig, channels: int, rng: np.random.Generator) -> Dict[str, ParamBlock]:
    blocks = _gru_blocks("gru", config.latent_dim, config.latent_dim, rng)
    c_in = config.latent_dim
    for i, (c_out, kernel, _, _) in enumerate(config.decoder_layers):
        c_out = channels if c_out is None else c_out
        # transponierte Faltung: Gewicht (C_in, C_out, K)
        fan_in = c_out * kernel
        blocks[f"deconv{i}_w"] = ParamBlock.uniform(
            f"deconv{i}_w", (c_in, c_out, kernel), fan_in, rng
        )
        blocks[f"deconv{i}_b"] = ParamBlock.uniform(f"deconv{i}_b", (c_out,), fan_in, rng)
        c_in = c_out
    blocks.update(_conv_pair("smooth", channels, channels, config.smoothing_kernel, rng))
    return blocks


def init_model(class_count: int, seed: int = 0,
               config: Optional[ModelConfig] = None) -> ModelParams:
    """Initialisiert alle sechs Teilnetze deterministisch aus ``seed``."""
    if class_count < 2:
        raise ShapeError(f"init_model: mindestens zwei Klassen erforderlich, nicht {class_count}")
    config = config or ModelConfig(class_count=class_count)
    rng = np.random.default_rng(seed)
    groups = {
        "enc_inertia": _encoder(config, CHANNELS[INERTIA], rng),
        "dec_inertia": _decoder(config, CHANNELS[INERTIA], rng),
        "enc_trajectory": _encoder(config, CHANNELS[TRAJECTORY], rng),
        "dec_trajectory": _decoder(config, CHANNELS[TRAJECTORY], rng),
        "cls": _affine_pair("cls", class_count, config.latent_dim, rng),
        "disc": {},
    }
    width = config.latent_dim
    for i in range(3):
        groups["disc"].update(_affine_pair(f"fc{i}", config.disc_hidden, width, rng))
        width = config.disc_hidden
    groups["disc"].update(_affine_pair("out", config.disc_outputs, width, rng))
    params = ModelParams(config, seed, groups)
    logger.debug(f"Modell initialisiert: {params.parameter_count()} Parameter, Seed {seed}")
    return params


# ----------------------------------------------------------------------
# Längenarithmetik

def feature_lengths(lengths: Sequence[int], config: Optional[ModelConfig] = None) -> List[np.ndarray]:
    """Gültige Länge nach jeder Encoder-Faltung, pro Probe."""
    stack = (config.encoder_layers if config else ENCODER_LAYERS)
    current = np.asarray(lengths, dtype=int)
    result = []
    for _, kernel, stride, pad in stack:
        current = (current + 2 * pad - kernel) // stride + 1
        result.append(current)
    return result


def feature_length(length: int, config: Optional[ModelConfig] = None) -> int:
    """Länge der letzten Merkmalskarte; bei k/s/p wie konfiguriert = ceil(L/8)."""
    return int(feature_lengths([length], config)[-1][0])


def round_half_up(x: float) -> int:
    """Rundet .5 immer nach oben; Pythons round() rundet auf die gerade Zahl."""
    return int(np.floor(x + 0.5))


def duration_steps(length: int, source_rate_hz: float, target_rate_hz: float,
                   policy: str = DEFAULT_DURATION_POLICY) -> int:
    """Wiederholungszahl t für den Decoder der Zieldomäne."""
    if policy not in DURATION_POLICIES:
        raise ValueError(f"Unbekannte Dauer-Policy: {policy}")
    if policy == "source-length":
        desired = length
    else:
        if target_rate_hz <= 0 or source_rate_hz <= 0:
            raise ValueError("rate-scaled: Abtastraten müssen positiv sein")
        desired = round_half_up(length * target_rate_hz / source_rate_hz)
    return max(1, round_half_up(desired / UPSAMPLING_FACTOR))


def _time_mask(valid: np.ndarray, steps: int) -> np.ndarray:
    return np.arange(steps)[None, :] < np.asarray(valid)[:, None]


# ----------------------------------------------------------------------
# Forward-Pfade

def _encode_arrays(params: ModelParams, values: np.ndarray, lengths: np.ndarray,
                   domain: str) -> Tensor:
    lengths = np.asarray(lengths, dtype=int)
    if np.any(lengths < 1):
        raise ShapeError("encode: leere Sequenz")
    blocks = params.groups[f"enc_{domain}"]
    valid = feature_lengths(lengths, params.config)
    if np.any(valid[-1] < 1):
        raise ShapeError(f"encode: Merkmalslänge < 1 für Längen {lengths.tolist()}")

    x = Tensor(values)
    for i, (_, kernel, stride, pad) in enumerate(params.config.encoder_layers):
        x = layers.conv1d(x, blocks[f"conv{i}_w"], blocks[f"conv{i}_b"], kernel, stride, pad)
        x = layers.leaky_relu(x)
        x = layers.apply_mask(x, _time_mask(valid[i], x.shape[2]))
    seq, _ = layers.gru_forward(x, blocks["gru_w"], blocks["gru_u"], blocks["gru_b"])
    return layers.select_time(seq, valid[-1] - 1)


def encode_batch(params: ModelParams, batch) -> Tensor:
    """Latent-Vektoren (B, 64) eines gepolsterten Batches."""
    return _encode_arrays(params, batch.values, batch.lengths, batch.domain)


def decode_batch(params: ModelParams, latents: Tensor, domain: str,
                 steps: Sequence[int]) -> Tensor:
    """Dekodiert (B, 64) mit probenweiser Dauer ``steps``; Ausgabe (B, C, 8·max(steps)).

    Zeitschritte jenseits von 8·steps[i] sind null.
    """
    steps = np.asarray(steps, dtype=int)
    if np.any(steps < 1):
        raise ShapeError(f"decode: t muss ≥ 1 sein, nicht {steps.min()}")
    blocks = params.groups[f"dec_{domain}"]
    t_max = int(steps.max())

    x = layers.repeat_time(latents, t_max)
    x, _ = layers.gru_forward(x, blocks["gru_w"], blocks["gru_u"], blocks["gru_b"])
    x = layers.apply_mask(x, _time_mask(steps, t_max))
    valid = steps
    last = len(params.config.decoder_layers) - 1
    for i, (_, kernel, stride, pad) in enumerate(params.config.decoder_layers):
        x = layers.conv1d_transpose(x, blocks[f"deconv{i}_w"], blocks[f"deconv{i}_b"],
                                    kernel, stride, pad)
        if i < last:
            x = layers.leaky_relu(x)
        valid = valid * stride
        x = layers.apply_mask(x, _time_mask(valid, x.shape[2]))
    kernel = params.config.smoothing_kernel
    x = layers.conv1d(x, blocks["smooth_w"], blocks["smooth_b"], kernel, 1, kernel // 2)
    return layers.apply_mask(x, _time_mask(valid, x.shape[2]))


def reconstruct_batch(params: ModelParams, batch) -> Tensor:
    """x̂ für jeden Eintrag des Batches, Länge = gepolsterte Batchlänge."""
    latents = encode_batch(params, batch)
    steps = feature_lengths(batch.lengths, params.config)[-1]
    recon = decode_batch(params, latents, batch.domain, steps)
    length = batch.values.shape[2]
    if recon.shape[2] < length:
        raise ShapeError(
            f"reconstruct: Ausgabe {recon.shape[2]} kürzer als Batch {length}; "
            f"Batchlänge muss ein Vielfaches von {UPSAMPLING_FACTOR} sein"
        )
    return layers.crop_time(recon, length)


def _single(sample: Sample) -> Tuple[np.ndarray, np.ndarray]:
    sample.validate()
    return sample.values[None, :, :], np.array([sample.length])


def encode(params: ModelParams, sample: Sample) -> np.ndarray:
    """Latent-Vektor (64,) einer einzelnen Probe."""
    values, lengths = _single(sample)
    return _encode_arrays(params, values, lengths, sample.domain).data[0].copy()


def decode(params: ModelParams, latent: np.ndarray, domain: str, steps: int) -> np.ndarray:
    """Sequenz (C, 8·steps) der Domäne ``domain``."""
    if steps < 1:
        raise ShapeError(f"decode: t muss ≥ 1 sein, nicht {steps}")
    latent = np.asarray(latent, dtype=np.float64).reshape(1, -1)
    return decode_batch(params, Tensor(latent), domain, [steps]).data[0].copy()


def reconstruct(params: ModelParams, sample: Sample) -> np.ndarray:
    """Rekonstruktion in der eigenen Domäne, Länge 8·ceil(L/8)."""
    latent = encode(params, sample)
    return decode(params, latent, sample.domain, feature_length(sample.length, params.config))


def translate(params: ModelParams, sample: Sample, policy: str = DEFAULT_DURATION_POLICY,
              target_rate_hz: Optional[float] = None) -> Sample:
    """Übersetzt eine Probe in die jeweils andere Domäne.

    Der Latent-Vektor des Quell-Encoders wird vom Decoder der Zieldomäne
    ausgelesen. Die Ausgabelänge ist 8·t mit t = max(1, ⌊L*/8 + ½⌋); L* ist
    L (``source-length``) oder ⌊L·r_Ziel/r_Quelle + ½⌋ (``rate-scaled``).
    """
    target = other_domain(sample.domain)
    rate = RATES_HZ[target] if target_rate_hz is None else float(target_rate_hz)
    steps = duration_steps(sample.length, sample.rate_hz, rate, policy)
    values = decode(params, encode(params, sample), target, steps)
    return Sample(sample.id, target, sample.label, rate, values, sample.class_name)


def translate_samples(params: ModelParams, samples: Sequence[Sample],
                      policy: str = DEFAULT_DURATION_POLICY,
                      target_rate_hz: Optional[float] = None,
                      batch_size: int = 64) -> List[Sample]:
    """Batchweise Variante von :func:`translate` mit identischem Ergebnis pro Probe."""
    out: List[Sample] = []
    for start in range(0, len(samples), batch_size):
        chunk = list(samples[start:start + batch_size])
        domains = {s.domain for s in chunk}
        if len(domains) != 1:
            raise DatasetError("translate: gemischte Domänen in einem Aufruf")
        source = domains.pop()
        target = other_domain(source)
        rate = RATES_HZ[target] if target_rate_hz is None else float(target_rate_hz)
        for s in chunk:
            s.validate()
        lengths = np.array([s.length for s in chunk])
        padded = int(np.ceil(lengths.max() / UPSAMPLING_FACTOR) * UPSAMPLING_FACTOR)
        values = np.zeros((len(chunk), CHANNELS[source], padded))
        for i, s in enumerate(chunk):
            values[i, :, :s.length] = s.values
        latents = _encode_arrays(params, values, lengths, source)
        steps = np.array([duration_steps(s.length, s.rate_hz, rate, policy) for s in chunk])
        decoded = decode_batch(params, latents, target, steps).data
        for i, s in enumerate(chunk):
            length = UPSAMPLING_FACTOR * steps[i]
            out.append(Sample(s.id, target, s.label, rate, decoded[i, :, :length].copy(),
                              s.class_name))
    return out


def classifier_logits(params: ModelParams, latents: Tensor) -> Tensor:
    cls = params.groups["cls"]
    return layers.affine(latents, cls["cls_w"], cls["cls_b"])


def classify_latent(params: ModelParams, latent) -> np.ndarray:
    """Softmax-Wahrscheinlichkeiten über K Klassen für (64,) oder (B, 64)."""
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape[-1] != params.config.latent_dim:
        raise ShapeError(f"classify_latent: Dimension {latent.shape[-1]} != 64")
    logits = classifier_logits(params, Tensor(np.atleast_2d(latent))).data
    probs = softmax(logits, axis=1)
    return probs[0] if latent.ndim == 1 else probs


def discriminate_latent(params: ModelParams, latents):
    """64 lineare Scores pro Latent-Vektor.

    Ein :class:`Tensor` (B, 64) bleibt im Graphen; ein numpy-Array liefert
    ein numpy-Array derselben Führungsform.
    """
    if not isinstance(latents, Tensor):
        array = np.asarray(latents, dtype=np.float64)
        scores = discriminate_latent(params, Tensor(np.atleast_2d(array))).data
        return scores[0] if array.ndim == 1 else scores
    disc = params.groups["disc"]
    x = latents
    for i in range(3):
        x = layers.affine_act(x, disc[f"fc{i}_w"], disc[f"fc{i}_b"], "leaky_relu")
    return layers.affine(x, disc["out_w"], disc["out_b"])


# ----------------------------------------------------------------------
# Checkpoint

@dataclass
class Checkpoint:
    params: ModelParams
    stats: Dict[str, ChannelStats]
    class_map: Dict[int, str]
    train_config: Dict = field(default_factory=dict)
    rates_hz: Dict[str, float] = field(default_factory=dict)


def save_checkpoint(path: str, params: ModelParams, stats: Dict[str, ChannelStats],
                    class_map: Dict[int, str], train_config: Optional[Dict] = None,
                    rates_hz: Optional[Dict[str, float]] = None) -> None:
    """Schreibt alle Parameter samt Adam-Zustand, Statistik und Klassen als joblib-Archiv.

    ``rates_hz`` hält die Abtastraten der Trainingsdaten je Domäne fest;
    die Übersetzung nutzt sie als Zielrate.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": params.config.to_dict(),
        "seed": params.seed,
        "train_config": dict(train_config or {}),
        "blocks": [
            {
                "group": group,
                "name": name,
                "shape": list(block.data.shape),
                "values": block.data,
                "adam": {
                    slot: {"m": state.m, "v": state.v, "t": state.t}
                    for slot, state in sorted(block.moments.items())
                },
            }
            for group in GROUPS
            for name, block in params.groups[group].items()
        ],
        "stats": {domain: stats[domain].to_dict() for domain in DOMAINS if domain in stats},
        "class_map": {int(k): v for k, v in sorted(class_map.items())},
        "rates_hz": {domain: float(rate) for domain, rate in sorted((rates_hz or {}).items())},
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        joblib.dump(payload, path)
    except OSError as e:
        raise DatasetError(f"Checkpoint {path} kann nicht geschrieben werden: {e}") from e
    logger.info(f"Checkpoint gespeichert: {path}")


def load_checkpoint(path: str) -> Checkpoint:
    try:
        payload = joblib.load(path)
    except (OSError, EOFError, ValueError) as e:
        raise DatasetError(f"Checkpoint {path} kann nicht gelesen werden: {e}") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise DatasetError(f"{path} ist kein Air-Writing-Checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DatasetError(f"{path}: nicht unterstützte Version {payload.get('version')}")

    config = ModelConfig.from_dict(payload["model_config"])
    groups: Dict[str, Dict[str, ParamBlock]] = {group: {} for group in GROUPS}
    for entry in payload["blocks"]:
        block = ParamBlock(entry["name"], np.array(entry["values"], dtype=np.float64))
        if list(block.data.shape) != entry["shape"]:
            raise DatasetError(f"{path}: Form von {entry['group']}/{entry['name']} beschädigt")
        for slot, state in entry["adam"].items():
            block.moments[slot] = AdamMoments(np.array(state["m"], dtype=np.float64),
                                              np.array(state["v"], dtype=np.float64),
                                              int(state["t"]))
        groups[entry["group"]][entry["name"]] = block
    params = ModelParams(config, int(payload["seed"]), groups)
    stats = {domain: ChannelStats.from_dict(s) for domain, s in payload["stats"].items()}
    class_map = {int(k): v for k, v in payload["class_map"].items()}
    rates = {domain: float(rate) for domain, rate in payload.get("rates_hz", {}).items()}
    return Checkpoint(params, stats, class_map, dict(payload.get("train_config", {})), rates)
