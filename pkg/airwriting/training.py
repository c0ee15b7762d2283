"""Alternierende Optimierung von L_rec, L_cls und L_gan auf ungepaarten Batches.

Pro Iteration: ein Rekonstruktionsschritt, ein Klassifikationsschritt, ein
Generatorschritt der Encoder und danach ``disc_updates_per_iter``
Diskriminatorschritte. Jeder Schritt aktualisiert nur seine eigenen
Parametergruppen, mit einem eigenen Adam-Slot pro Verlustterm.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.settings import (
    BATCH_SIZE,
    CHANNELS,
    DEFAULT_DURATION_POLICY,
    DEFAULT_EPOCHS,
    DISC_UPDATES_PER_ITER,
    DURATION_POLICIES,
    INERTIA,
    LEARNING_RATE,
    TRAJECTORY,
    UPSAMPLING_FACTOR,
)
from .data import Dataset, Sample, check_class_maps
from .exceptions import ConfigError, DatasetError, NumericalError
from .model import (
    ModelParams,
    classifier_logits,
    discriminate_latent,
    encode_batch,
    init_model,
    reconstruct_batch,
)
from .numerics import losses
from .numerics.layers import add
from .numerics.optim import Adam
from .numerics.tensor import Tensor, check_finite, zero_grads

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ("step", "l_rec", "l_cls", "l_gan_g", "l_gan_d")


@dataclass
class Batch:
    """Gepolsterter Batch einer Domäne.

    Attributes:
        values: (B, C, L_max), L_max auf ein Vielfaches von 8 aufgerundet.
        mask: (B, L_max), True genau für l < lengths[i].
        lengths: Wahre Längen.
        labels: Klassenindizes.
        domain: Gemeinsame Domäne aller Proben.
        rate_hz: Gemeinsame Abtastrate.
    """

    values: np.ndarray
    mask: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    domain: str
    rate_hz: float

    def __len__(self) -> int:
        return self.values.shape[0]


def padded_length(length: int) -> int:
    return int(math.ceil(length / UPSAMPLING_FACTOR) * UPSAMPLING_FACTOR)


def pad_and_mask(samples: Sequence[Sample]) -> Batch:
    """Polstert Proben einer Domäne mit Nullen auf ein gemeinsames Vielfaches von 8."""
    if not samples:
        raise DatasetError("pad_and_mask: leere Probenliste")
    domains = {s.domain for s in samples}
    if len(domains) != 1:
        raise DatasetError(f"pad_and_mask: gemischte Domänen {sorted(domains)}")
    domain = domains.pop()

    lengths = np.array([s.length for s in samples], dtype=int)
    l_max = padded_length(int(lengths.max()))
    values = np.zeros((len(samples), CHANNELS[domain], l_max))
    for i, s in enumerate(samples):
        values[i, :, :s.length] = s.values
    mask = np.arange(l_max)[None, :] < lengths[:, None]
    return Batch(
        values=values,
        mask=mask,
        lengths=lengths,
        labels=np.array([s.label for s in samples], dtype=int),
        domain=domain,
        rate_hz=float(samples[0].rate_hz),
    )


def _cycled_order(size: int, needed: int, rng: np.random.Generator) -> np.ndarray:
    """Aneinandergereihte Permutationen, jede neu gemischt, bis ``needed`` Indizes vorliegen."""
    rounds = int(math.ceil(needed / size))
    return np.concatenate([rng.permutation(size) for _ in range(rounds)])[:needed]


def make_unpaired_batches(dataset_i: Dataset, dataset_t: Dataset, batch_size: int,
                          seed: int, epoch: int = 0) -> Iterator[Tuple[Batch, Batch]]:
    """Ungepaarte Batchpaare für eine Epoche.

    Jede Domäne wird mit einer eigenen Permutation gemischt. Eine Epoche ist
    ein Durchlauf über den größeren Datensatz; der kleinere läuft zyklisch mit
    Neumischung. Die Paare sind nur über ihren Index verbunden.
    """
    if not dataset_i.samples or not dataset_t.samples:
        raise DatasetError("make_unpaired_batches: beide Datensätze müssen Proben enthalten")
    if batch_size < 1:
        raise ConfigError(f"batch_size muss ≥ 1 sein, nicht {batch_size}")

    longest = max(len(dataset_i), len(dataset_t))
    rng_i = np.random.default_rng([seed, epoch, 0])
    rng_t = np.random.default_rng([seed, epoch, 1])
    order_i = _cycled_order(len(dataset_i), longest, rng_i)
    order_t = _cycled_order(len(dataset_t), longest, rng_t)

    for start in range(0, longest, batch_size):
        stop = min(start + batch_size, longest)
        yield (
            pad_and_mask([dataset_i.samples[k] for k in order_i[start:stop]]),
            pad_and_mask([dataset_t.samples[k] for k in order_t[start:stop]]),
        )


def prefetch(batches: Iterator, enabled: bool = True) -> Iterator:
    """Bereitet das nächste Element in einem Worker-Thread vor; Reihenfolge bleibt erhalten."""
    if not enabled:
        yield from batches
        return
    done = object()
    with ThreadPoolExecutor(max_workers=1) as pool:
        future = pool.submit(next, batches, done)
        while True:
            item = future.result()
            if item is done:
                break
            future = pool.submit(next, batches, done)
            yield item


@dataclass
class TrainConfig:
    lr: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    disc_updates_per_iter: int = DISC_UPDATES_PER_ITER
    seed: int = 0
    # Reihenfolge der Batches; None übernimmt seed
    shuffle_seed: Optional[int] = None
    enable_cls: bool = True
    enable_gan: bool = True
    duration_policy: str = DEFAULT_DURATION_POLICY
    prefetch: bool = True

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size muss ≥ 1 sein, nicht {self.batch_size}")
        if self.disc_updates_per_iter < 1:
            raise ConfigError(
                f"train.disc_updates_per_iter muss ≥ 1 sein, nicht {self.disc_updates_per_iter}"
            )
        if self.epochs < 0:
            raise ConfigError(f"train.epochs darf nicht negativ sein: {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"train.lr muss positiv sein: {self.lr}")
        if self.duration_policy not in DURATION_POLICIES:
            raise ConfigError(f"train.duration_policy unbekannt: {self.duration_policy}")

    @property
    def batch_seed(self) -> int:
        return self.seed if self.shuffle_seed is None else self.shuffle_seed

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossReport:
    step: int
    l_rec: float
    l_cls: float = 0.0
    l_gan_g: float = 0.0
    l_gan_d: float = 0.0

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.l_rec, self.l_cls, self.l_gan_g, self.l_gan_d))


@dataclass
class MetricsLog:
    """Ein Datensatz pro Iteration; optional als CSV fortgeschrieben."""

    path: Optional[str] = None
    records: List[LossReport] = field(default_factory=list)
    _flushed: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.path:
            directory = os.path.dirname(self.path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            if os.path.exists(self.path):
                os.remove(self.path)

    def append(self, report: LossReport) -> None:
        self.records.append(report)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=list(METRICS_COLUMNS))

    def flush(self) -> None:
        if not self.path or self._flushed == len(self.records):
            return
        frame = pd.DataFrame(
            [asdict(r) for r in self.records[self._flushed:]], columns=list(METRICS_COLUMNS)
        )
        frame.to_csv(self.path, mode="a", header=self._flushed == 0, index=False, float_format="%.10g")
        self._flushed = len(self.records)


def read_metrics(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(f"Metrik-Log {path} kann nicht gelesen werden: {e}") from e


# ----------------------------------------------------------------------
# Einzelschritte

STEP_SLOTS = ("rec", "cls", "gen", "disc")


@dataclass
class StepOptimizers:
    """Ein Adam pro Verlustterm; jeder führt eigene Momente in den Blöcken."""

    rec: Adam
    cls: Adam
    gen: Adam
    disc: Adam

    @classmethod
    def create(cls, lr: float) -> "StepOptimizers":
        return cls(*(Adam(lr=lr, slot=slot) for slot in STEP_SLOTS))


def _finite(loss: Tensor, name: str) -> float:
    value = loss.item()
    if not math.isfinite(value):
        raise NumericalError(f"Nicht-endlicher Verlust {name}: {value}")
    return value


def _optimize(params: ModelParams, loss: Tensor, name: str, opt: Adam,
              groups: Sequence[str]) -> float:
    value = _finite(loss, name)
    loss.backward()
    blocks = params.blocks(*groups)
    check_finite(blocks, name)
    opt.step(blocks)
    zero_grads(params.all_blocks())
    return value


def rec_step(params: ModelParams, batch_i: Batch, batch_t: Batch, opt: Adam) -> float:
    """L_rec = L1(x_I, x̂_I) + L1(x_T, x̂_T); aktualisiert Encoder und Decoder."""
    zero_grads(params.all_blocks())
    loss = add(
        losses.l1_loss(reconstruct_batch(params, batch_i), Tensor(batch_i.values), batch_i.mask),
        losses.l1_loss(reconstruct_batch(params, batch_t), Tensor(batch_t.values), batch_t.mask),
    )
    return _optimize(params, loss, "l_rec", opt,
                     ("enc_inertia", "dec_inertia", "enc_trajectory", "dec_trajectory"))


def cls_step(params: ModelParams, batch_i: Batch, batch_t: Batch, opt: Adam) -> float:
    """L_cls = xent(C_f(e_I(x_I)), y_I) + xent(C_f(e_T(x_T)), y_T)."""
    zero_grads(params.all_blocks())
    loss = add(
        losses.softmax_xent(classifier_logits(params, encode_batch(params, batch_i)),
                            batch_i.labels),
        losses.softmax_xent(classifier_logits(params, encode_batch(params, batch_t)),
                            batch_t.labels),
    )
    return _optimize(params, loss, "l_cls", opt, ("enc_inertia", "enc_trajectory", "cls"))


def detached_latents(params: ModelParams, batch_i: Batch,
                     batch_t: Batch) -> Tuple[Tensor, Tensor]:
    return encode_batch(params, batch_i).detach(), encode_batch(params, batch_t).detach()


def gan_disc_step(params: ModelParams, batch_i: Batch, batch_t: Batch, opt: Adam,
                  latents: Optional[Tuple[Tensor, Tensor]] = None) -> float:
    """Diskriminatorschritt auf abgekoppelten Latents.

    ``latents`` darf vorab berechnet übergeben werden; die Encoder ändern
    sich zwischen aufeinanderfolgenden Diskriminatorschritten nicht.
    """
    zero_grads(params.all_blocks())
    latent_i, latent_t = latents if latents is not None else detached_latents(params, batch_i, batch_t)
    d_loss, _ = losses.lsgan_losses(discriminate_latent(params, latent_i),
                                    discriminate_latent(params, latent_t))
    return _optimize(params, d_loss, "l_gan_d", opt, ("disc",))


def gan_gen_step(params: ModelParams, batch_i: Batch, batch_t: Batch, opt: Adam) -> float:
    """Encoder versuchen D_f zu täuschen; nur e_I und e_T werden bewegt."""
    zero_grads(params.all_blocks())
    _, g_loss = losses.lsgan_losses(discriminate_latent(params, encode_batch(params, batch_i)),
                                    discriminate_latent(params, encode_batch(params, batch_t)))
    return _optimize(params, g_loss, "l_gan_g", opt, ("enc_inertia", "enc_trajectory"))


def train_iteration(params: ModelParams, batch_i: Batch, batch_t: Batch,
                    optimizers: StepOptimizers, config: TrainConfig, step: int) -> LossReport:
    report = LossReport(step=step, l_rec=rec_step(params, batch_i, batch_t, optimizers.rec))
    if config.enable_cls:
        report.l_cls = cls_step(params, batch_i, batch_t, optimizers.cls)
    if config.enable_gan:
        report.l_gan_g = gan_gen_step(params, batch_i, batch_t, optimizers.gen)
        latents = detached_latents(params, batch_i, batch_t)
        d_losses = [gan_disc_step(params, batch_i, batch_t, optimizers.disc, latents)
                    for _ in range(config.disc_updates_per_iter)]
        report.l_gan_d = d_losses[-1]
    return report


# ----------------------------------------------------------------------
# Trainingsschleife

def train(config: TrainConfig, dataset_i: Dataset, dataset_t: Dataset,
          metrics_path: Optional[str] = None,
          params: Optional[ModelParams] = None) -> Tuple[ModelParams, MetricsLog]:
    """Trainiert den Translater auf vorverarbeiteten, standardisierten Datensätzen.

    Args:
        config: Hyperparameter und Ablationsschalter.
        dataset_i: Inertialdaten.
        dataset_t: Trajektoriendaten.
        metrics_path: Optionaler CSV-Pfad für das Metrik-Log.
        params: Fortsetzung eines bestehenden Modells; sonst Neuinitialisierung.

    Returns:
        Trainierte Parameter und das Metrik-Log (ein Eintrag pro Iteration).
    """
    config.validate()
    if dataset_i.domain != INERTIA or dataset_t.domain != TRAJECTORY:
        raise DatasetError(
            f"train: erwartet (inertia, trajectory), erhalten ({dataset_i.domain}, {dataset_t.domain})"
        )
    check_class_maps(dataset_i, dataset_t)
    for dataset in (dataset_i, dataset_t):
        for sample in dataset.samples:
            sample.validate()
    if params is None:
        params = init_model(dataset_i.class_count, config.seed)
    elif params.class_count != dataset_i.class_count:
        raise DatasetError(
            f"train: Modell hat {params.class_count} Klassen, Daten {dataset_i.class_count}"
        )

    optimizers = StepOptimizers.create(config.lr)
    log = MetricsLog(metrics_path)
    step = 0
    logger.info(
        f"Training gestartet: {len(dataset_i)} Inertial-, {len(dataset_t)} Trajektorienproben, "
        f"{config.epochs} Epochen, cls={'an' if config.enable_cls else 'aus'}, "
        f"gan={'an' if config.enable_gan else 'aus'}"
    )
    for epoch in range(config.epochs):
        batches = make_unpaired_batches(dataset_i, dataset_t, config.batch_size,
                                        config.batch_seed, epoch)
        total = math.ceil(max(len(dataset_i), len(dataset_t)) / config.batch_size)
        progress = tqdm(prefetch(batches, config.prefetch), total=total,
                        desc=f"Epoche {epoch + 1}/{config.epochs}", leave=False)
        epoch_reports = []
        for batch_i, batch_t in progress:
            try:
                report = train_iteration(params, batch_i, batch_t, optimizers, config, step)
            except NumericalError:
                log.flush()
                logger.error(f"Training abgebrochen in Schritt {step} (Epoche {epoch + 1})")
                raise
            log.append(report)
            epoch_reports.append(report)
            progress.set_postfix(l_rec=f"{report.l_rec:.4f}")
            step += 1
        log.flush()
        means = pd.DataFrame([asdict(r) for r in epoch_reports]).mean()
        logger.info(
            f"Epoche {epoch + 1}: l_rec={means['l_rec']:.4f} l_cls={means['l_cls']:.4f} "
            f"l_gan_g={means['l_gan_g']:.4f} l_gan_d={means['l_gan_d']:.4f}"
        )
    return params, log
