"""
Datensätze: AWT-JSONL Ein-/Ausgabe, Vorverarbeitung, Standardisierung und Split

Eine AWT-JSONL-Datei enthält pro Zeile ein JSON-Objekt mit den Feldern ``id``,
``domain`` ("inertia" | "trajectory"), ``label``, ``class_name``, ``rate_hz`` und
``data`` (L Zeilen mit je C Werten in der Reihenfolge ax,ay,az,gx,gy,gz bzw. x,y,z).
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from config.settings import (
    CHANNEL_NAMES,
    CHANNELS,
    DOMAINS,
    INERTIA,
    MIN_SEQUENCE_LENGTH,
    MOVING_AVERAGE_WINDOW,
    TRAIN_FRACTION,
    TRAJECTORY,
)
from .exceptions import DatasetError

logger = logging.getLogger(__name__)


@dataclass
class Sample:
    """Eine Zeitreihe mit Domäne, Klassenlabel und Abtastrate.

    Attributes:
        id: Eindeutige Kennung innerhalb des Datensatzes.
        domain: ``"inertia"`` oder ``"trajectory"``.
        label: Klassenindex.
        rate_hz: Abtastrate.
        values: Werte der Form (C, L).
        class_name: Klartextname der Klasse.
    """

    id: str
    domain: str
    label: int
    rate_hz: float
    values: np.ndarray
    class_name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def validate(self) -> None:
        if self.domain not in DOMAINS:
            raise DatasetError(f"Unbekannte Domäne '{self.domain}' in Probe {self.id}")
        if self.values.ndim != 2 or self.channels != CHANNELS[self.domain]:
            raise DatasetError(
                f"Probe {self.id}: {self.values.shape[0] if self.values.ndim == 2 else '?'} "
                f"Kanäle, erwartet {CHANNELS[self.domain]} für {self.domain}"
            )
        if self.length < MIN_SEQUENCE_LENGTH:
            raise DatasetError(
                f"Probe {self.id}: Länge {self.length} < {MIN_SEQUENCE_LENGTH}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DatasetError(f"Probe {self.id} enthält NaN/Inf")

    def with_values(self, values: np.ndarray) -> "Sample":
        return replace(self, values=np.asarray(values, dtype=np.float64))


@dataclass
class Dataset:
    """Homogene Menge von Proben einer Domäne und Abtastrate."""

    samples: List[Sample]
    class_map: Dict[int, str]
    rate_hz: float
    domain: str

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    @property
    def class_count(self) -> int:
        return len(self.class_map)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], dict(self.class_map),
                       self.rate_hz, self.domain)

    def map_values(self, fn) -> "Dataset":
        return Dataset([s.with_values(fn(s.values)) for s in self.samples],
                       dict(self.class_map), self.rate_hz, self.domain)

    def by_id(self) -> Dict[str, Sample]:
        return {s.id: s for s in self.samples}

    def validate(self) -> None:
        if not self.samples:
            raise DatasetError(f"Datensatz ({self.domain}) ist leer")
        for sample in self.samples:
            sample.validate()
            if sample.domain != self.domain:
                raise DatasetError(f"Probe {sample.id} gehört nicht zur Domäne {self.domain}")
            if sample.rate_hz != self.rate_hz:
                raise DatasetError(
                    f"Probe {sample.id}: Abtastrate {sample.rate_hz} != {self.rate_hz}"
                )
        present = set(self.labels.tolist())
        expected = set(range(len(self.class_map)))
        if present != expected or set(self.class_map) != expected:
            raise DatasetError(
                f"Labels sind nicht dicht in [0, {len(self.class_map)}): {sorted(present)}"
            )


@dataclass
class PairingManifest:
    """Grundwahrheit (trajectory_id, inertia_id); nur für die Evaluation."""

    pairs: List[Tuple[str, str]] = field(default_factory=list)

    def trajectory_for(self) -> Dict[str, str]:
        return {inertia_id: trajectory_id for trajectory_id, inertia_id in self.pairs}

    def inertia_for(self) -> Dict[str, str]:
        return {trajectory_id: inertia_id for trajectory_id, inertia_id in self.pairs}


# ----------------------------------------------------------------------
# Ein-/Ausgabe

def load_dataset(path: str, domain: str) -> Dataset:
    """Lädt und validiert eine AWT-JSONL-Datei.

    Args:
        path: Pfad zur Datei.
        domain: Erwartete Domäne.

    Returns:
        Validierter Datensatz.

    Raises:
        DatasetError: Parse-Fehler (mit Zeilennummer), Kanal- oder Domänenkonflikt,
            nicht dichte Labels, leere Datei.
    """
    if domain not in DOMAINS:
        raise DatasetError(f"Unbekannte Domäne: {domain}")
    samples: List[Sample] = []
    class_map: Dict[int, str] = {}
    try:
        with open(path, "rb") as f:
            for line_no, raw in enumerate(f, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise DatasetError(
                        f"{path}:{line_no}: kein gültiges UTF-8 (Byte {exc.start}, {exc.reason})"
                    ) from exc
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    sample = Sample(
                        id=str(record["id"]),
                        domain=record["domain"],
                        label=int(record["label"]),
                        rate_hz=float(record["rate_hz"]),
                        values=np.asarray(record["data"], dtype=np.float64).T,
                        class_name=str(record.get("class_name", "")),
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise DatasetError(f"{path}:{line_no}: ungültiger Datensatz ({exc})") from exc
                if sample.domain != domain:
                    raise DatasetError(
                        f"{path}:{line_no}: Domäne '{sample.domain}', erwartet '{domain}'"
                    )
                try:
                    sample.validate()
                except DatasetError as exc:
                    raise DatasetError(f"{path}:{line_no}: {exc}") from exc
                known = class_map.setdefault(sample.label, sample.class_name)
                if known != sample.class_name:
                    raise DatasetError(
                        f"{path}:{line_no}: Label {sample.label} heißt '{known}' "
                        f"und '{sample.class_name}'"
                    )
                samples.append(sample)
    except OSError as exc:
        raise DatasetError(f"Datei {path} kann nicht gelesen werden: {exc}") from exc

    if not samples:
        raise DatasetError(f"{path}: Datei enthält keine Proben")
    dataset = Dataset(samples, dict(sorted(class_map.items())), samples[0].rate_hz, domain)
    dataset.validate()
    logger.info(f"{len(dataset)} Proben ({domain}, {dataset.class_count} Klassen) aus {path} geladen")
    return dataset


def save_dataset(dataset: Dataset, path: str) -> None:
    """Schreibt einen Datensatz im AWT-JSONL-Format."""
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for sample in dataset.samples:
                record = {
                    "id": sample.id,
                    "domain": sample.domain,
                    "label": int(sample.label),
                    "class_name": sample.class_name,
                    "rate_hz": float(sample.rate_hz),
                    "data": sample.values.T.tolist(),
                }
                f.write(json.dumps(record) + "\n")
    except OSError as exc:
        raise DatasetError(f"Datei {path} kann nicht geschrieben werden: {exc}") from exc


def load_manifest(path: str) -> PairingManifest:
    try:
        with open(path, "r", encoding="utf-8") as f:
            entries = json.load(f)
        return PairingManifest([(e["trajectory_id"], e["inertia_id"]) for e in entries])
    except OSError as exc:
        raise DatasetError(f"Datei {path} kann nicht gelesen werden: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: ungültiges Paar-Manifest ({exc})") from exc


def save_manifest(manifest: PairingManifest, path: str) -> None:
    entries = [{"trajectory_id": t, "inertia_id": i} for t, i in manifest.pairs]
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(entries, f, indent=1)
    except OSError as exc:
        raise DatasetError(f"Datei {path} kann nicht geschrieben werden: {exc}") from exc


def import_csv_samples(paths: Sequence[str], domain: str, rate_hz: float) -> Dataset:
    """Importiert CSV-Exporte (eine Aufnahme pro Datei) als Datensatz.

    Die Klasse wird aus dem Dateinamen bis zum ersten ``_`` gelesen
    (``a_0001.csv`` → Klasse ``a``). Tragen die Spalten die dokumentierten Namen,
    wird nach ihnen sortiert, sonst werden die ersten C Spalten verwendet.
    """
    names = CHANNEL_NAMES[domain]
    frames = []
    for path in sorted(paths):
        try:
            frame = pd.read_csv(path)
        except (OSError, ValueError) as exc:
            raise DatasetError(f"CSV {path} kann nicht gelesen werden: {exc}") from exc
        if set(names) <= set(frame.columns):
            frame = frame[list(names)]
        else:
            frame = frame.iloc[:, :len(names)]
        if frame.shape[1] != len(names):
            raise DatasetError(f"CSV {path}: {frame.shape[1]} Spalten, erwartet {len(names)}")
        stem = os.path.splitext(os.path.basename(path))[0]
        frames.append((stem, stem.split("_")[0], frame.to_numpy(dtype=np.float64).T))

    class_names = sorted({class_name for _, class_name, _ in frames})
    index = {name: i for i, name in enumerate(class_names)}
    samples = [
        Sample(stem, domain, index[class_name], float(rate_hz), values, class_name)
        for stem, class_name, values in frames
    ]
    dataset = Dataset(samples, dict(enumerate(class_names)), float(rate_hz), domain)
    dataset.validate()
    return dataset


# ----------------------------------------------------------------------
# Vorverarbeitung

def moving_average(values: np.ndarray, window: int = MOVING_AVERAGE_WINDOW) -> np.ndarray:
    """Zentrierter gleitender Mittelwert pro Kanal.

    Am Rand wird das Fenster auf die vorhandenen Nachbarn gekürzt; bei Fenster 5
    haben die Ränder die Breiten 3, 4, 5, ..., 5, 4, 3.
    """
    values = np.asarray(values, dtype=np.float64)
    length = values.shape[1]
    half = window // 2
    cumsum = np.concatenate([np.zeros((values.shape[0], 1)), np.cumsum(values, axis=1)], axis=1)
    t = np.arange(length)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half + 1, length)
    return (cumsum[:, hi] - cumsum[:, lo]) / (hi - lo)


def preprocess_inertial(sample: Sample) -> Sample:
    if sample.domain != INERTIA:
        raise DatasetError(f"preprocess_inertial: Probe {sample.id} ist {sample.domain}")
    return sample.with_values(moving_average(sample.values))


def preprocess_trajectory(sample: Sample) -> Sample:
    if sample.domain != TRAJECTORY:
        raise DatasetError(f"preprocess_trajectory: Probe {sample.id} ist {sample.domain}")
    return sample.with_values(sample.values - sample.values[:, :1])


def preprocess_dataset(dataset: Dataset) -> Dataset:
    fn = preprocess_inertial if dataset.domain == INERTIA else preprocess_trajectory
    return Dataset([fn(s) for s in dataset.samples], dict(dataset.class_map),
                   dataset.rate_hz, dataset.domain)


@dataclass
class ChannelStats:
    """Kanalweise Mittelwerte und Standardabweichungen einer Domäne."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, dataset: Dataset) -> Dataset:
        return dataset.map_values(self.transform)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[:, None]) / self.std[:, None]

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[:, None] + self.mean[:, None]

    def to_dict(self) -> Dict[str, list]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, list]) -> "ChannelStats":
        return cls(np.asarray(payload["mean"], dtype=np.float64),
                   np.asarray(payload["std"], dtype=np.float64))


def standardize(dataset: Dataset) -> Tuple[Dataset, ChannelStats]:
    """Kanalweise Standardisierung auf Mittelwert 0 und Streuung 1.

    Kanäle ohne Varianz werden gemeldet, ihre Streuung wird auf 1 gesetzt.
    """
    if not dataset.samples:
        raise DatasetError("standardize: Datensatz ist leer")
    stacked = np.concatenate([s.values for s in dataset.samples], axis=1)
    mean = stacked.mean(axis=1)
    std = stacked.std(axis=1)
    flat = std < 1e-12
    if np.any(flat):
        logger.warning(
            f"Kanäle ohne Varianz in {dataset.domain}: {np.flatnonzero(flat).tolist()}, "
            "Streuung auf 1 gesetzt"
        )
        std = np.where(flat, 1.0, std)
    stats = ChannelStats(mean, std)
    return stats.apply(dataset), stats


def split(dataset: Dataset, train_fraction: float = TRAIN_FRACTION,
          seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Stratifizierter, deterministischer Train/Test-Split."""
    labels = dataset.labels
    counts = np.bincount(labels, minlength=dataset.class_count)
    if np.any(counts < 2):
        raise DatasetError(
            f"split: Klassen mit weniger als 2 Proben: {np.flatnonzero(counts < 2).tolist()}"
        )
    train_idx, test_idx = train_test_split(
        np.arange(len(dataset)),
        train_size=train_fraction,
        stratify=labels,
        random_state=seed,
    )
    return dataset.subset(np.sort(train_idx)), dataset.subset(np.sort(test_idx))


def check_class_maps(first: Dataset, second: Dataset) -> None:
    """Beide Domänen müssen dieselben Klassen unter denselben Indizes führen."""
    if first.class_map != second.class_map:
        raise DatasetError(
            f"Klassen von {first.domain} und {second.domain} stimmen nicht überein"
        )


def prepare_split(dataset: Dataset, seed: int,
                  stats: Optional[ChannelStats] = None) -> Tuple[Dataset, Dataset, ChannelStats]:
    """Vorverarbeitung → Split (80/20) → Standardisierung mit Trainingsstatistik."""
    train, test = split(preprocess_dataset(dataset), seed=seed)
    if stats is None:
        train, stats = standardize(train)
    else:
        train = stats.apply(train)
    return train, stats.apply(test), stats
