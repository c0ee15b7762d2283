"""Qualitätsanalyse: MMD, Probe-Klassifikatoren, Latent-Probes, Zwei-Strom-Modell, Ablation."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist, pdist
from scipy.special import log_softmax
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.neighbors import NearestCentroid

from config.settings import (
    CHANNELS,
    DEFAULT_DURATION_POLICY,
    INERTIA,
    MMD_RESAMPLE_LENGTH,
    PROBE_BATCH_SIZE,
    PROBE_EPOCHS,
    PROBE_FOLDS,
    PROBE_LAYERS,
    PROBE_LEARNING_RATE,
    RATES_HZ,
    TRAJECTORY,
)
from .data import Dataset, PairingManifest, Sample
from .exceptions import DatasetError, ShapeError
from .model import ModelParams, encode_batch, other_domain, translate_samples
from .numerics import layers, losses
from .numerics.optim import Adam
from .numerics.tensor import ParamBlock, Tensor, zero_grads
from .synth import resample
from .training import TrainConfig, pad_and_mask, train

logger = logging.getLogger(__name__)

ARMS = ("full", "no-cls", "no-gan")


# ----------------------------------------------------------------------
# MMD

def _flatten(sequences: Sequence[np.ndarray], length: int) -> np.ndarray:
    return np.stack([resample(np.asarray(s, dtype=np.float64), length).ravel() for s in sequences])


def mmd_score(set_a: Sequence[np.ndarray], set_b: Sequence[np.ndarray],
              length: int = MMD_RESAMPLE_LENGTH) -> float:
    """Verzerrter Schätzer des quadrierten MMD mit RBF-Kern.

    Jede Sequenz (C, L) wird auf ``length`` Schritte umgetastet und
    flachgelegt. Die Bandbreite ist der Median der paarweisen Abstände über
    beide Mengen zusammen.
    """
    if not len(set_a) or not len(set_b):
        raise DatasetError("mmd_score: beide Mengen müssen Sequenzen enthalten")
    channels = {np.asarray(s).shape[0] for s in list(set_a) + list(set_b)}
    if len(channels) != 1:
        raise ShapeError(f"mmd_score: unterschiedliche Kanalzahlen {sorted(channels)}")

    a = _flatten(set_a, length)
    b = _flatten(set_b, length)
    pooled = pdist(np.vstack([a, b]))
    sigma = float(np.median(pooled)) if pooled.size else 0.0
    if sigma <= 0.0:
        sigma = 1.0
    gamma = 1.0 / (2.0 * sigma ** 2)

    def kernel_mean(x: np.ndarray, y: np.ndarray) -> float:
        return float(np.exp(-gamma * cdist(x, y, "sqeuclidean")).mean())

    value = kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b)
    return max(value, 0.0)


def naive_translate(sample: Sample, target_rate_hz: Optional[float] = None) -> Sample:
    """Vergleichsbasis ohne Modell: ratenskaliert umtasten, erste C_Ziel Kanäle behalten."""
    target = other_domain(sample.domain)
    rate = RATES_HZ[target] if target_rate_hz is None else float(target_rate_hz)
    length = max(2, int(round(sample.length * rate / sample.rate_hz)))
    values = resample(sample.values, length)[:CHANNELS[target]]
    if values.shape[0] < CHANNELS[target]:
        values = np.vstack([values, np.zeros((CHANNELS[target] - values.shape[0], length))])
    return Sample(sample.id, target, sample.label, rate, values, sample.class_name)


# ----------------------------------------------------------------------
# Probe-Klassifikator

class ProbeClassifier:
    """Kleines Faltungsnetz pro Eingangsstrom, gemeinsamer Softmax-Kopf.

    Ein Strom: drei Faltungen (k5, s2, Breiten 32/64/64) mit leaky-ReLU, danach
    maskiertes Zeitmittel. Mehrere Ströme werden vor dem Kopf verkettet.

    Args:
        domains: Domäne jedes Eingangsstroms.
        class_count: Anzahl Klassen K.
        seed: Seed der Initialisierung.
    """

    def __init__(self, domains: Sequence[str], class_count: int, seed: int = 0):
        self.domains = tuple(domains)
        self.class_count = class_count
        rng = np.random.default_rng([seed, 4711])
        self.trunks: List[Dict[str, ParamBlock]] = []
        for domain in self.domains:
            blocks = {}
            c_in = CHANNELS[domain]
            for i, (c_out, kernel, _, _) in enumerate(PROBE_LAYERS):
                blocks[f"conv{i}_w"] = ParamBlock.uniform(
                    f"conv{i}_w", (c_out, c_in, kernel), c_in * kernel, rng
                )
                blocks[f"conv{i}_b"] = ParamBlock.uniform(f"conv{i}_b", (c_out,), c_in * kernel, rng)
                c_in = c_out
            self.trunks.append(blocks)
        width = PROBE_LAYERS[-1][0] * len(self.domains)
        self.head = {
            "out_w": ParamBlock.uniform("out_w", (class_count, width), width, rng),
            "out_b": ParamBlock.uniform("out_b", (class_count,), width, rng),
        }

    @property
    def domain(self) -> str:
        return self.domains[0]

    def blocks(self) -> List[ParamBlock]:
        return [b for trunk in self.trunks for b in trunk.values()] + list(self.head.values())

    def _features(self, trunk: Dict[str, ParamBlock], batch) -> Tensor:
        x = Tensor(batch.values)
        valid = np.asarray(batch.lengths)
        for i, (_, kernel, stride, pad) in enumerate(PROBE_LAYERS):
            x = layers.conv1d(x, trunk[f"conv{i}_w"], trunk[f"conv{i}_b"], kernel, stride, pad)
            x = layers.leaky_relu(x)
            valid = (valid + 2 * pad - kernel) // stride + 1
            x = layers.apply_mask(x, np.arange(x.shape[2])[None, :] < valid[:, None])
        return layers.masked_mean_time(x, np.arange(x.shape[2])[None, :] < valid[:, None])

    def logits(self, batches: Sequence) -> Tensor:
        if len(batches) != len(self.domains):
            raise ShapeError(f"Probe erwartet {len(self.domains)} Ströme, erhielt {len(batches)}")
        for batch, domain in zip(batches, self.domains):
            if batch.domain != domain:
                raise DatasetError(f"Probe für {domain} erhielt {batch.domain}")
        features = [self._features(trunk, batch) for trunk, batch in zip(self.trunks, batches)]
        pooled = features[0] if len(features) == 1 else layers.concat_features(features)
        return layers.affine(pooled, self.head["out_w"], self.head["out_b"])

    def predict_logits(self, streams: Sequence[Sequence[Sample]],
                       batch_size: int = 128) -> np.ndarray:
        size = len(streams[0])
        out = []
        for start in range(0, size, batch_size):
            batches = [pad_and_mask(list(s[start:start + batch_size])) for s in streams]
            out.append(self.logits(batches).data)
        return np.vstack(out)


def fit_probe(probe: ProbeClassifier, streams: Sequence[Sequence[Sample]], labels: np.ndarray,
              epochs: int = PROBE_EPOCHS, seed: int = 0, batch_size: int = PROBE_BATCH_SIZE,
              lr: float = PROBE_LEARNING_RATE) -> ProbeClassifier:
    """Minibatch-Training mit Adam; deterministisch pro Seed."""
    labels = np.asarray(labels, dtype=int)
    opt = Adam(lr=lr)
    blocks = probe.blocks()
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(len(labels))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            batches = [pad_and_mask([stream[k] for k in idx]) for stream in streams]
            zero_grads(blocks)
            loss = losses.softmax_xent(probe.logits(batches), labels[idx])
            loss.backward()
            opt.step(blocks)
    return probe


def train_probe(dataset: Dataset, epochs: int = PROBE_EPOCHS, seed: int = 0,
                batch_size: int = PROBE_BATCH_SIZE, lr: float = PROBE_LEARNING_RATE,
                labels: Optional[np.ndarray] = None) -> ProbeClassifier:
    """Trainiert den Ein-Strom-Probe auf einem standardisierten Datensatz."""
    if not dataset.samples:
        raise DatasetError("train_probe: Datensatz ist leer")
    probe = ProbeClassifier((dataset.domain,), dataset.class_count, seed)
    fit_probe(probe, [dataset.samples], dataset.labels if labels is None else labels,
              epochs, seed, batch_size, lr)
    logger.info(f"Probe für {dataset.domain} trainiert ({epochs} Epochen)")
    return probe


@dataclass
class ProbeScore:
    accuracy: float
    loss: float
    per_class: List[float]
    confusion: List[List[int]]
    predictions: np.ndarray = field(repr=False, default=None)


def _score(logits: np.ndarray, labels: np.ndarray, class_count: int) -> ProbeScore:
    labels = np.asarray(labels, dtype=int)
    log_probs = log_softmax(logits, axis=1)
    predictions = log_probs.argmax(axis=1)
    matrix = confusion_matrix(labels, predictions, labels=np.arange(class_count))
    support = matrix.sum(axis=1)
    per_class = np.divide(np.diag(matrix), support, out=np.zeros(class_count),
                          where=support > 0)
    return ProbeScore(
        accuracy=float(np.mean(predictions == labels)),
        loss=float(-log_probs[np.arange(len(labels)), labels].mean()),
        per_class=per_class.tolist(),
        confusion=matrix.tolist(),
        predictions=predictions,
    )


def evaluate_probe(probe: ProbeClassifier, dataset: Dataset) -> ProbeScore:
    return _score(probe.predict_logits([dataset.samples]), dataset.labels, probe.class_count)


# ----------------------------------------------------------------------
# Übersetzte Proben

@dataclass
class TranslationScore:
    direction: str
    accuracy: float
    loss: float
    per_class: List[float]
    confusion: List[List[int]]
    ground_truth_l1: Optional[float] = None
    translations: List[Sample] = field(default_factory=list, repr=False)


def paired_partners(translations: Sequence[Sample], target: Dataset,
                    manifest: PairingManifest) -> List[Optional[Sample]]:
    """Echtes Gegenstück jeder Übersetzung laut Manifest, None wo keines existiert."""
    lookup = manifest.trajectory_for() if target.domain == TRAJECTORY else manifest.inertia_for()
    by_id = target.by_id()
    return [by_id.get(lookup.get(sample.id, "")) for sample in translations]


def ground_truth_l1(translations: Sequence[Sample], target: Dataset,
                    manifest: PairingManifest) -> Optional[float]:
    """Mittlere L1-Abweichung zum gepaarten Original nach Umtasten auf dessen Länge."""
    errors = []
    for sample, partner in zip(translations, paired_partners(translations, target, manifest)):
        if partner is None:
            continue
        aligned = resample(sample.values, partner.length)
        errors.append(float(np.abs(aligned - partner.values).mean()))
    if not errors:
        logger.warning("Keine gepaarten Gegenstücke gefunden, L1 zur Grundwahrheit entfällt")
        return None
    return float(np.mean(errors))


def eval_translated(probe: ProbeClassifier, params: ModelParams, source: Dataset,
                    manifest: Optional[PairingManifest] = None,
                    target: Optional[Dataset] = None,
                    policy: str = DEFAULT_DURATION_POLICY,
                    target_rate_hz: Optional[float] = None) -> TranslationScore:
    """Übersetzt jede Quellprobe und lässt den Probe der Zieldomäne klassifizieren.

    Mit Manifest und Zieldatensatz wird zusätzlich die L1-Abweichung zum
    echten Gegenstück berechnet.
    """
    target_domain = other_domain(source.domain)
    if probe.domain != target_domain:
        raise DatasetError(
            f"eval_translated: Probe für {probe.domain}, Übersetzung liefert {target_domain}"
        )
    rate = target_rate_hz if target_rate_hz is not None else (
        target.rate_hz if target is not None else RATES_HZ[target_domain]
    )
    translations = translate_samples(params, source.samples, policy, rate)
    score = _score(probe.predict_logits([translations]), source.labels, probe.class_count)
    gt = None
    if manifest is not None and target is not None:
        gt = ground_truth_l1(translations, target, manifest)
    direction = "i2t" if source.domain == INERTIA else "t2i"
    return TranslationScore(direction, score.accuracy, score.loss, score.per_class,
                            score.confusion, gt, translations)


# ----------------------------------------------------------------------
# Latent-Probes

def encode_dataset(params: ModelParams, dataset: Dataset, batch_size: int = 128) -> np.ndarray:
    """Latent-Matrix (N, 64) eines Datensatzes."""
    out = []
    for start in range(0, len(dataset), batch_size):
        batch = pad_and_mask(dataset.samples[start:start + batch_size])
        out.append(encode_batch(params, batch).data)
    return np.vstack(out)


@dataclass
class LatentProbeResult:
    class_probe_acc: float
    domain_probe_acc: float
    cross_domain_centroid_acc: float
    class_probe_acc_inertia: float
    class_probe_acc_trajectory: float


def _cv_accuracy(features: np.ndarray, targets: np.ndarray, seed: int) -> float:
    counts = np.bincount(targets)
    folds = int(min(PROBE_FOLDS, counts[counts > 0].min()))
    if folds < 2:
        raise DatasetError("Latent-Probe: mindestens zwei Proben pro Klasse erforderlich")
    cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    scores = cross_val_score(LogisticRegression(max_iter=2000), features, targets, cv=cv)
    return float(np.mean(scores))


def latent_probes(params: ModelParams, test_i: Dataset, test_t: Dataset,
                  seed: int = 0) -> LatentProbeResult:
    """Lineare Probes auf eingefrorenen Latents beider Domänen.

    Klassen-Probe über beide Domänen, Domänen-Probe (inertia gegen trajectory)
    und die Zentroid-Genauigkeit: jede Trajektorien-Latent wird der nächsten
    inertialen Klassenmitte zugeordnet.
    """
    lat_i = encode_dataset(params, test_i)
    lat_t = encode_dataset(params, test_t)
    y_i, y_t = test_i.labels, test_t.labels
    pooled = np.vstack([lat_i, lat_t])
    domains = np.concatenate([np.zeros(len(lat_i), dtype=int), np.ones(len(lat_t), dtype=int)])

    centroids = NearestCentroid().fit(lat_i, y_i)
    result = LatentProbeResult(
        class_probe_acc=_cv_accuracy(pooled, np.concatenate([y_i, y_t]), seed),
        domain_probe_acc=_cv_accuracy(pooled, domains, seed),
        cross_domain_centroid_acc=float(centroids.score(lat_t, y_t)),
        class_probe_acc_inertia=_cv_accuracy(lat_i, y_i, seed),
        class_probe_acc_trajectory=_cv_accuracy(lat_t, y_t, seed),
    )
    logger.info(
        f"Latent-Probes: Klasse {result.class_probe_acc:.3f}, Domäne {result.domain_probe_acc:.3f}, "
        f"Zentroid {result.cross_domain_centroid_acc:.3f}"
    )
    return result


# ----------------------------------------------------------------------
# Zwei-Strom-Erkennung

@dataclass
class TwoStreamResult:
    two_stream_acc: float
    single_stream_acc: float
    per_class_two_stream: List[float]
    per_class_single_stream: List[float]
    minority_class: int
    shuffled: bool = False

    @property
    def minority_two_stream(self) -> float:
        return self.per_class_two_stream[self.minority_class]

    @property
    def minority_single_stream(self) -> float:
        return self.per_class_single_stream[self.minority_class]


def two_stream_eval(params: ModelParams, train_src: Dataset, test_src: Dataset, seed: int = 0,
                    epochs: int = PROBE_EPOCHS, batch_size: int = PROBE_BATCH_SIZE,
                    lr: float = PROBE_LEARNING_RATE, policy: str = DEFAULT_DURATION_POLICY,
                    shuffle_translations: bool = False) -> TwoStreamResult:
    """Vergleicht das Zwei-Strom-Modell (echt + übersetzt) mit dem Ein-Strom-Probe.

    Beide Modelle sehen denselben Split und denselben Seed. Mit
    ``shuffle_translations`` werden die Übersetzungen den falschen Eingaben
    zugeordnet (Kontrollexperiment).
    """
    target = other_domain(train_src.domain)
    train_trans = translate_samples(params, train_src.samples, policy)
    test_trans = translate_samples(params, test_src.samples, policy)
    if shuffle_translations:
        rng = np.random.default_rng([seed, 99])
        train_trans = [train_trans[k] for k in rng.permutation(len(train_trans))]
        test_trans = [test_trans[k] for k in rng.permutation(len(test_trans))]

    class_count = train_src.class_count
    two = ProbeClassifier((train_src.domain, target), class_count, seed)
    fit_probe(two, [train_src.samples, train_trans], train_src.labels, epochs, seed, batch_size, lr)
    single = train_probe(train_src, epochs, seed, batch_size, lr)

    two_score = _score(two.predict_logits([test_src.samples, test_trans]), test_src.labels,
                       class_count)
    single_score = evaluate_probe(single, test_src)
    counts = np.bincount(train_src.labels, minlength=class_count)
    result = TwoStreamResult(
        two_stream_acc=two_score.accuracy,
        single_stream_acc=single_score.accuracy,
        per_class_two_stream=two_score.per_class,
        per_class_single_stream=single_score.per_class,
        minority_class=int(np.argmin(counts)),
        shuffled=shuffle_translations,
    )
    logger.info(
        f"Zwei-Strom {result.two_stream_acc:.3f} gegen Ein-Strom {result.single_stream_acc:.3f}"
        f"{' (Kontrolle)' if shuffle_translations else ''}"
    )
    return result


# ----------------------------------------------------------------------
# Gesamtbericht

@dataclass
class EvalSplits:
    train_i: Dataset
    test_i: Dataset
    train_t: Dataset
    test_t: Dataset


@dataclass
class EvalOptions:
    probe_epochs: int = PROBE_EPOCHS
    probe_batch_size: int = PROBE_BATCH_SIZE
    probe_lr: float = PROBE_LEARNING_RATE
    # None: die beim Training festgelegte train.duration_policy
    policy: Optional[str] = None
    two_stream: bool = True
    seed: int = 0
    n_jobs: int = 1


@dataclass
class EvalReport:
    """Alle Kennzahlen eines Evaluationslaufs; als ein JSON-Dokument serialisierbar."""

    arm: str
    mmd: float
    mmd_naive: float
    mmd_t2i: float
    classifier_acc: float
    classifier_loss: float
    classifier_acc_t2i: float
    classifier_loss_t2i: float
    real_probe_acc_trajectory: float
    real_probe_acc_inertia: float
    latent_class_probe_acc: float
    latent_domain_probe_acc: float
    cross_domain_centroid_acc: float
    class_probe_acc_inertia: float
    class_probe_acc_trajectory: float
    per_class_i2t: List[float]
    per_class_t2i: List[float]
    confusion_i2t: List[List[int]]
    confusion_t2i: List[List[int]]
    class_names: List[str]
    ground_truth_l1_i2t: Optional[float] = None
    ground_truth_l1_t2i: Optional[float] = None
    two_stream_acc: Optional[float] = None
    single_stream_acc: Optional[float] = None
    per_class_two_stream: Optional[List[float]] = None
    per_class_single_stream: Optional[List[float]] = None

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class RealProbes:
    inertia: ProbeClassifier
    trajectory: ProbeClassifier


def train_real_probes(splits: EvalSplits, options: EvalOptions) -> RealProbes:
    kwargs = dict(epochs=options.probe_epochs, seed=options.seed,
                  batch_size=options.probe_batch_size, lr=options.probe_lr)
    return RealProbes(train_probe(splits.train_i, **kwargs), train_probe(splits.train_t, **kwargs))


def run_evaluation(params: ModelParams, splits: EvalSplits, options: EvalOptions,
                   manifest: Optional[PairingManifest] = None, arm: str = "full",
                   probes: Optional[RealProbes] = None) -> EvalReport:
    """Führt MMD, Probe-Prüfung, Latent-Probes und optional das Zwei-Strom-Experiment aus."""
    probes = probes or train_real_probes(splits, options)
    policy = options.policy or DEFAULT_DURATION_POLICY
    full_i = Dataset(splits.train_i.samples + splits.test_i.samples, splits.test_i.class_map,
                     splits.test_i.rate_hz, INERTIA)
    full_t = Dataset(splits.train_t.samples + splits.test_t.samples, splits.test_t.class_map,
                     splits.test_t.rate_hz, TRAJECTORY)

    i2t = eval_translated(probes.trajectory, params, splits.test_i, manifest, full_t, policy)
    t2i = eval_translated(probes.inertia, params, splits.test_t, manifest, full_i, policy)
    real_t = [s.values for s in splits.test_t.samples]
    real_i = [s.values for s in splits.test_i.samples]
    naive = [naive_translate(s, splits.test_t.rate_hz).values for s in splits.test_i.samples]
    latent = latent_probes(params, splits.test_i, splits.test_t, options.seed)

    report = EvalReport(
        arm=arm,
        mmd=mmd_score([s.values for s in i2t.translations], real_t),
        mmd_naive=mmd_score(naive, real_t),
        mmd_t2i=mmd_score([s.values for s in t2i.translations], real_i),
        classifier_acc=i2t.accuracy,
        classifier_loss=i2t.loss,
        classifier_acc_t2i=t2i.accuracy,
        classifier_loss_t2i=t2i.loss,
        real_probe_acc_trajectory=evaluate_probe(probes.trajectory, splits.test_t).accuracy,
        real_probe_acc_inertia=evaluate_probe(probes.inertia, splits.test_i).accuracy,
        latent_class_probe_acc=latent.class_probe_acc,
        latent_domain_probe_acc=latent.domain_probe_acc,
        cross_domain_centroid_acc=latent.cross_domain_centroid_acc,
        class_probe_acc_inertia=latent.class_probe_acc_inertia,
        class_probe_acc_trajectory=latent.class_probe_acc_trajectory,
        per_class_i2t=i2t.per_class,
        per_class_t2i=t2i.per_class,
        confusion_i2t=i2t.confusion,
        confusion_t2i=t2i.confusion,
        class_names=[splits.test_i.class_map[k] for k in sorted(splits.test_i.class_map)],
        ground_truth_l1_i2t=i2t.ground_truth_l1,
        ground_truth_l1_t2i=t2i.ground_truth_l1,
    )
    if options.two_stream:
        two = two_stream_eval(params, splits.train_i, splits.test_i, options.seed,
                              options.probe_epochs, options.probe_batch_size, options.probe_lr,
                              policy)
        report.two_stream_acc = two.two_stream_acc
        report.single_stream_acc = two.single_stream_acc
        report.per_class_two_stream = two.per_class_two_stream
        report.per_class_single_stream = two.per_class_single_stream
    logger.info(
        f"Evaluation [{arm}]: MMD {report.mmd:.4f} (naiv {report.mmd_naive:.4f}), "
        f"i2t {report.classifier_acc:.3f}, t2i {report.classifier_acc_t2i:.3f}"
    )
    return report


def arm_config(config: TrainConfig, arm: str) -> TrainConfig:
    if arm not in ARMS:
        raise ValueError(f"Unbekannter Ablationsarm: {arm}")
    return replace(config, enable_cls=arm != "no-cls", enable_gan=arm != "no-gan")


def _run_arm(arm: str, config: TrainConfig, splits: EvalSplits, options: EvalOptions,
             probes: RealProbes, manifest: Optional[PairingManifest]) -> Tuple[ModelParams, EvalReport]:
    params, _ = train(arm_config(config, arm), splits.train_i, splits.train_t)
    options = replace(options, two_stream=False,
                      policy=options.policy or config.duration_policy)
    return params, run_evaluation(params, splits, options, manifest, arm, probes)


def ablation_suite(config: TrainConfig, splits: EvalSplits, options: EvalOptions,
                   manifest: Optional[PairingManifest] = None,
                   arms: Sequence[str] = ARMS) -> List[EvalReport]:
    """Trainiert je Arm (voll, ohne L_cls, ohne L_gan) mit gemeinsamem Seed und bewertet ihn.

    Die Real-Probes werden einmal trainiert und von allen Armen geteilt. Mit
    ``options.n_jobs > 1`` laufen die Arme parallel.
    """
    probes = train_real_probes(splits, options)
    results = Parallel(n_jobs=options.n_jobs)(
        delayed(_run_arm)(arm, config, splits, options, probes, manifest) for arm in arms
    )
    return [report for _, report in results]
