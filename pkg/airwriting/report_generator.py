"""
Report Generator für den Air-Writing Translater
Schreibt Evaluationsberichte, Diagramme und SVG-Vorschauen
"""
import json
import logging
import math
import os
import xml.etree.ElementTree as ET
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .data import Sample  # noqa: E402
from .exceptions import DatasetError  # noqa: E402

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
SVG_SIZE = 256
SVG_MARGIN = 8


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


class ReportGenerator:
    def __init__(self, output_dir: str = "reports"):
        self.output_dir = output_dir
        if output_dir and not os.path.exists(output_dir):
            os.makedirs(output_dir)

    def _path(self, filename: str) -> str:
        return filename if os.path.isabs(filename) else os.path.join(self.output_dir, filename)

    def write_eval_report(self, reports: Sequence[Dict],
                          filename: str = "eval_report.json") -> str:
        """Schreibt einen oder mehrere Evaluationsberichte als ein JSON-Dokument."""
        document = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "created": datetime.now().strftime("%Y-%m-%dT%H:%M:%S"),
            "reports": _json_safe(list(reports)),
        }
        path = self._path(filename)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=2, ensure_ascii=False)
        except OSError as e:
            raise DatasetError(f"Bericht {path} kann nicht geschrieben werden: {e}") from e
        logger.info(f"Evaluationsbericht geschrieben: {path}")
        return path

    def create_loss_plot(self, metrics: pd.DataFrame,
                         filename: str = "loss_curves.png") -> Optional[str]:
        """Verlustkurven aus dem Metrik-Log."""
        try:
            fig, axes = plt.subplots(2, 2, figsize=(10, 6), sharex=True)
            for ax, column in zip(axes.ravel(), ("l_rec", "l_cls", "l_gan_g", "l_gan_d")):
                ax.plot(metrics["step"], metrics[column], linewidth=0.8)
                ax.set_title(column)
                ax.grid(alpha=0.3)
            for ax in axes[-1]:
                ax.set_xlabel("Iteration")
            fig.tight_layout()
            path = self._path(filename)
            fig.savefig(path, dpi=120)
            plt.close(fig)
            return path
        except Exception as e:
            logger.error(f"Fehler beim Erstellen der Verlustkurven: {str(e)}")
            return None

    def create_per_class_plot(self, report: Dict,
                              filename: str = "per_class_accuracy.png") -> Optional[str]:
        """Balken pro Klasse: Ein-Strom gegen Zwei-Strom, sonst i2t gegen t2i."""
        try:
            names = report["class_names"]
            if report.get("per_class_two_stream") is not None:
                series = {
                    "Ein-Strom": report["per_class_single_stream"],
                    "Zwei-Strom": report["per_class_two_stream"],
                }
            else:
                series = {"i2t": report["per_class_i2t"], "t2i": report["per_class_t2i"]}
            positions = np.arange(len(names))
            width = 0.8 / len(series)
            fig, ax = plt.subplots(figsize=(max(6, len(names) * 0.5), 4))
            for i, (label, values) in enumerate(series.items()):
                ax.bar(positions + i * width, values, width, label=label)
            ax.set_xticks(positions + width * (len(series) - 1) / 2)
            ax.set_xticklabels(names)
            ax.set_ylim(0, 1)
            ax.set_ylabel("Genauigkeit")
            ax.legend()
            fig.tight_layout()
            path = self._path(filename)
            fig.savefig(path, dpi=120)
            plt.close(fig)
            return path
        except Exception as e:
            logger.error(f"Fehler beim Erstellen des Klassendiagramms: {str(e)}")
            return None

    def create_translation_preview(self, translated: Sequence[Sample],
                                   ground_truth: Sequence[Optional[Sample]],
                                   filename: str = "translation_preview.png",
                                   limit: int = 8) -> Optional[str]:
        """x-y-Verläufe übersetzter Trajektorien neben ihrem echten Gegenstück."""
        try:
            count = min(limit, len(translated))
            if count == 0:
                return None
            fig, axes = plt.subplots(2, count, figsize=(2 * count, 4), squeeze=False)
            for i in range(count):
                axes[0, i].plot(translated[i].values[0], translated[i].values[1], linewidth=1)
                axes[0, i].set_title(translated[i].class_name or str(translated[i].label))
                truth = ground_truth[i] if i < len(ground_truth) else None
                if truth is not None:
                    axes[1, i].plot(truth.values[0], truth.values[1], linewidth=1, color="gray")
                for ax in axes[:, i]:
                    ax.set_aspect("equal", adjustable="datalim")
                    ax.axis("off")
            axes[0, 0].text(-0.1, 0.5, "übersetzt", transform=axes[0, 0].transAxes,
                            rotation=90, va="center", ha="right")
            axes[1, 0].text(-0.1, 0.5, "echt", transform=axes[1, 0].transAxes,
                            rotation=90, va="center", ha="right")
            fig.tight_layout()
            path = self._path(filename)
            fig.savefig(path, dpi=120)
            plt.close(fig)
            return path
        except Exception as e:
            logger.error(f"Fehler beim Erstellen der Vorschau: {str(e)}")
            return None


def svg_polyline(values: np.ndarray, size: int = SVG_SIZE, margin: int = SVG_MARGIN) -> str:
    """SVG-Dokument mit genau einer Polyline über die x-y-Kanäle."""
    xy = np.asarray(values, dtype=np.float64)[:2]
    lo = xy.min(axis=1, keepdims=True)
    span = float((xy.max(axis=1, keepdims=True) - lo).max())
    scale = (size - 2 * margin) / span if span > 0 else 1.0
    x = margin + (xy[0] - lo[0]) * scale
    # SVG-y zeigt nach unten
    y = size - margin - (xy[1] - lo[1]) * scale

    root = ET.Element("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": str(size),
        "height": str(size),
        "viewBox": f"0 0 {size} {size}",
    })
    ET.SubElement(root, "polyline", {
        "points": " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y)),
        "fill": "none",
        "stroke": "black",
        "stroke-width": "2",
    })
    return ET.tostring(root, encoding="unicode")


def sanitize_filename(filename: str) -> str:
    """Bereinigt Dateinamen von ungültigen Zeichen"""
    return "".join(c for c in filename if c.isalnum() or c in (" ", "-", "_", "."))


def write_svgs(samples: Sequence[Sample], svg_dir: str) -> List[str]:
    """Eine SVG-Datei pro Probe, benannt nach der Proben-ID."""
    os.makedirs(svg_dir, exist_ok=True)
    paths = []
    for sample in samples:
        path = os.path.join(svg_dir, f"{sanitize_filename(sample.id) or 'sample'}.svg")
        with open(path, "w", encoding="utf-8") as f:
            f.write(svg_polyline(sample.values))
        paths.append(path)
    logger.info(f"{len(paths)} SVG-Dateien geschrieben nach {svg_dir}")
    return paths
