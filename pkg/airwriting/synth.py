"""Synthetische Luftschrift: Glyphen-Trajektorien und kinematisch erzeugte Inertialsignale.

Jede Klasse bekommt eine parametrische 2-D-Glyphe (geschlossene oder offene
Spline-Kurve). Jede Probe variiert Größe, Drehung, Lage, Dauer und
Schreibgeschwindigkeit. Das inertiale Gegenstück entsteht über
:func:`kinematic_oracle` aus derselben Bewegung.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter1d

from config.settings import INERTIA, MIN_SEQUENCE_LENGTH, RATES_HZ, TRAJECTORY
from .data import Dataset, PairingManifest, Sample
from .exceptions import DatasetError

logger = logging.getLogger(__name__)

CLASS_NAMES = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


@dataclass
class SynthConfig:
    """Parameter des synthetischen Generators.

    ``min_length``/``max_length`` gelten für die Trajektorien-Domäne; die
    Inertiallänge folgt aus dem Ratenverhältnis.
    """

    class_count: int = 5
    samples_per_class: int = 200
    min_length: int = 48
    max_length: int = 160
    trajectory_rate_hz: float = RATES_HZ[TRAJECTORY]
    inertia_rate_hz: float = RATES_HZ[INERTIA]
    noise_std: float = 0.02
    bias_std: float = 0.05
    gyro_noise_std: float = 0.05
    scale_jitter: float = 0.15
    rotation_jitter_deg: float = 10.0
    translation_jitter: float = 0.2
    time_warp: float = 0.25
    z_noise: float = 0.03
    # Anteil der Minderheitsklasse (None = balanciert)
    minority_class: Optional[int] = None
    minority_fraction: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.class_count < 2:
            raise DatasetError("SynthConfig: class_count muss ≥ 2 sein")
        if self.class_count > len(CLASS_NAMES):
            raise DatasetError(f"SynthConfig: höchstens {len(CLASS_NAMES)} Klassen")
        if self.min_length < MIN_SEQUENCE_LENGTH or self.max_length < self.min_length:
            raise DatasetError(
                f"SynthConfig: Längenbereich [{self.min_length}, {self.max_length}] ungültig"
            )
        if self.samples_per_class < 2:
            raise DatasetError("SynthConfig: samples_per_class muss ≥ 2 sein")
        if self.minority_class is not None and not 0 <= self.minority_class < self.class_count:
            raise DatasetError(f"SynthConfig: minority_class {self.minority_class} ungültig")

    @property
    def rate_ratio(self) -> float:
        return self.inertia_rate_hz / self.trajectory_rate_hz

    @property
    def trajectory_length_range(self) -> Tuple[int, int]:
        """Untergrenze so angehoben, dass jede Inertialprobe ≥ 16 Schritte hat."""
        lower = max(self.min_length, math.ceil(MIN_SEQUENCE_LENGTH / self.rate_ratio))
        while round(lower * self.rate_ratio) < MIN_SEQUENCE_LENGTH:
            lower += 1
        return lower, max(lower, self.max_length)

    def class_sizes(self) -> List[int]:
        sizes = [self.samples_per_class] * self.class_count
        if self.minority_class is not None:
            sizes[self.minority_class] = max(
                2, int(round(self.samples_per_class * self.minority_fraction))
            )
        return sizes


def resample(values: np.ndarray, target_len: int) -> np.ndarray:
    """Lineare Interpolation pro Kanal über normierte Zeit [0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    length = values.shape[1]
    if length < 2 or target_len < 2:
        raise DatasetError(f"resample: Längen {length} → {target_len} ungültig (≥ 2)")
    if target_len == length:
        return values.copy()
    source = np.linspace(0.0, 1.0, length)
    target = np.linspace(0.0, 1.0, target_len)
    return np.stack([np.interp(target, source, channel) for channel in values])


def _heading_rate(velocity: np.ndarray, dt: float) -> np.ndarray:
    """Drehrate der planaren Geschwindigkeitsrichtung; Stillstand behält die letzte Richtung."""
    speed = np.hypot(velocity[0], velocity[1])
    heading = np.arctan2(velocity[1], velocity[0])
    moving = speed > 1e-9
    if not np.any(moving):
        return np.zeros_like(speed)
    first = int(np.argmax(moving))
    heading[:first] = heading[first]
    for t in range(first + 1, len(heading)):
        if not moving[t]:
            heading[t] = heading[t - 1]
    return np.gradient(np.unwrap(heading), dt)


def second_difference(positions: np.ndarray, dt: float) -> np.ndarray:
    """Zentrale zweite Differenz / dt²; an den Rändern die des Nachbarn."""
    acc = np.empty_like(positions)
    acc[:, 1:-1] = positions[:, 2:] - 2.0 * positions[:, 1:-1] + positions[:, :-2]
    acc[:, 0] = acc[:, 1]
    acc[:, -1] = acc[:, -2]
    return acc / dt ** 2


def _smooth_unit_noise(length: int, rng: np.random.Generator, sigma: float) -> np.ndarray:
    """Geglättetes Gaußrauschen mit Streuung 1."""
    noise = gaussian_filter1d(rng.normal(size=length), sigma=max(sigma, 1.0))
    return noise / (noise.std() + 1e-12)


def _correlated_drift(length: int, rng: np.random.Generator) -> np.ndarray:
    """Langsame, zwischen x und y korrelierte Drift (2, length)."""
    sigma = length / 6.0
    shared = _smooth_unit_noise(length, rng, sigma)
    return np.stack([
        shared + 0.3 * _smooth_unit_noise(length, rng, sigma),
        0.8 * shared + 0.3 * _smooth_unit_noise(length, rng, sigma),
    ])


def kinematic_oracle(trajectory: Sample, dt: float, target_len: Optional[int] = None,
                     rng: Optional[np.random.Generator] = None, noise_std: float = 0.0,
                     bias_std: float = 0.0, gyro_noise_std: float = 0.0) -> Sample:
    """Erzeugt ein 6-Kanal-Inertialsignal aus einer Trajektorie.

    Die Trajektorie wird zunächst auf ``target_len`` Schritte (Inertialrate)
    umgetastet. Beschleunigung = zweite Differenz der Position; gz = Drehrate
    der Bewegungsrichtung in der x-y-Ebene; gx, gy = korreliertes Rauschen.
    Ohne ``rng`` entsteht das Signal rauschfrei und deterministisch.

    Args:
        trajectory: Probe der Trajektorien-Domäne (L ≥ 3).
        dt: Abtastintervall der Inertialdomäne in Sekunden.
        target_len: Länge des Inertialsignals; ``None`` übernimmt L.
        rng: Zufallsquelle für Rauschen und Bias.
        noise_std: Streuung des additiven Sensorrauschens.
        bias_std: Streuung des konstanten Bias pro Kanal und Probe.
        gyro_noise_std: Amplitude des korrelierten Rauschens auf gx, gy.
    """
    if trajectory.length < 3:
        raise DatasetError(f"kinematic_oracle: Länge {trajectory.length} < 3")
    positions = trajectory.values
    if target_len is not None and target_len != trajectory.length:
        positions = resample(positions, target_len)
    length = positions.shape[1]

    acc = second_difference(positions, dt)
    velocity = np.gradient(positions, dt, axis=1)
    gyro = np.zeros((3, length))
    gyro[2] = _heading_rate(velocity[:2], dt)

    if rng is not None:
        gyro[0], gyro[1] = gyro_noise_std * _correlated_drift(length, rng)
        signal = np.concatenate([acc, gyro])
        signal += rng.normal(scale=bias_std, size=(6, 1))
        signal += rng.normal(scale=noise_std, size=signal.shape)
    else:
        signal = np.concatenate([acc, gyro])

    return Sample(
        id=trajectory.id,
        domain=INERTIA,
        label=trajectory.label,
        rate_hz=1.0 / dt,
        values=signal,
        class_name=trajectory.class_name,
    )


def glyph_template(label: int, seed: int, points: int = 256) -> np.ndarray:
    """Parametrische Glyphe (2, points) für eine Klasse.

    Gerade Klassen sind geschlossene, ungerade offene Spline-Striche durch
    klassenspezifische Stützpunkte.
    """
    rng = np.random.default_rng([seed, 7919, label])
    closed = label % 2 == 0
    knots = 6 if closed else 5
    if closed:
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=knots))
        radii = rng.uniform(0.4, 1.0, size=knots)
        control = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        control = np.vstack([control, control[:1]])
        spline = CubicSpline(np.linspace(0, 1, knots + 1), control, bc_type="periodic")
    else:
        control = rng.uniform(-1.0, 1.0, size=(knots, 2))
        spline = CubicSpline(np.linspace(0, 1, knots), control, bc_type="natural")
    return spline(np.linspace(0, 1, points)).T


def _time_warp(length: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Monotone Abbildung [0, 1] → [0, 1] für Geschwindigkeitsschwankungen."""
    log_speed = gaussian_filter1d(rng.normal(size=length), sigma=max(length / 8.0, 1.0))
    log_speed = strength * log_speed / (np.abs(log_speed).max() + 1e-12)
    increments = np.exp(log_speed)
    warp = np.concatenate([[0.0], np.cumsum(increments[:-1])])
    return warp / warp[-1]


def _render(template: np.ndarray, length: int, cfg: SynthConfig,
            rng: np.random.Generator) -> np.ndarray:
    scale = 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter)
    theta = np.deg2rad(rng.uniform(-cfg.rotation_jitter_deg, cfg.rotation_jitter_deg))
    rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    shift = rng.uniform(-cfg.translation_jitter, cfg.translation_jitter, size=(2, 1))

    u = _time_warp(length, cfg.time_warp, rng)
    grid = np.linspace(0.0, 1.0, template.shape[1])
    planar = np.stack([np.interp(u, grid, channel) for channel in template])
    planar = scale * (rotation @ planar) + shift
    z = cfg.z_noise * gaussian_filter1d(rng.normal(size=length), sigma=max(length / 4.0, 1.0))
    return np.vstack([planar, z[None, :]])


def synth_generate(cfg: SynthConfig) -> Tuple[Dataset, Dataset, PairingManifest]:
    """Erzeugt gepaarte Trajektorien- und Inertialdatensätze samt Manifest.

    Die beiden Datensätze werden unabhängig ausgegeben; die Zuordnung steht
    ausschließlich im Manifest.
    """
    cfg.validate()
    low, high = cfg.trajectory_length_range
    dt = 1.0 / cfg.inertia_rate_hz
    class_map: Dict[int, str] = {k: CLASS_NAMES[k] for k in range(cfg.class_count)}

    trajectories: List[Sample] = []
    inertials: List[Sample] = []
    pairs: List[Tuple[str, str]] = []
    for label, size in enumerate(cfg.class_sizes()):
        template = glyph_template(label, cfg.seed)
        rng = np.random.default_rng([cfg.seed, label])
        for index in range(size):
            length = int(rng.integers(low, high + 1))
            traj_id = f"T{label:02d}_{index:04d}"
            inertia_id = f"I{label:02d}_{index:04d}"
            trajectory = Sample(traj_id, TRAJECTORY, label, cfg.trajectory_rate_hz,
                                _render(template, length, cfg, rng), class_map[label])
            inertial = kinematic_oracle(
                trajectory, dt,
                target_len=int(round(length * cfg.rate_ratio)),
                rng=rng,
                noise_std=cfg.noise_std,
                bias_std=cfg.bias_std,
                gyro_noise_std=cfg.gyro_noise_std,
            )
            inertial.id = inertia_id
            inertial.rate_hz = cfg.inertia_rate_hz
            trajectories.append(trajectory)
            inertials.append(inertial)
            pairs.append((traj_id, inertia_id))

    logger.info(
        f"Synthetische Daten erzeugt: {cfg.class_count} Klassen, "
        f"{len(trajectories)} Proben pro Domäne"
    )
    return (
        Dataset(trajectories, dict(class_map), cfg.trajectory_rate_hz, TRAJECTORY),
        Dataset(inertials, dict(class_map), cfg.inertia_rate_hz, INERTIA),
        PairingManifest(pairs),
    )
