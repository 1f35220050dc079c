"""SVG charts from a matrix report and its traces sidecar."""
from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import CATEGORY_ORDER, read_report  # noqa: E402

_SVG_META = {"Date": None}


def sidecar_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.name + ".traces.json")


def _save(fig, path: Path) -> Path:
    plt.rcParams["svg.hashsalt"] = "chillpass"
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_coefficients(rows, out_dir: Path, threshold: float = 2.0) -> Path:
    """Ascending coefficients per attempt category, one line each."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for cat in CATEGORY_ORDER:
        totals = sorted(r.total for r in rows if r.category is cat and math.isfinite(r.total))
        if totals:
            ax.plot(range(1, len(totals) + 1), totals, marker="o", markersize=3, label=cat.value)
    ax.axhline(threshold, color="black", linestyle="--", linewidth=0.8, label=f"threshold {threshold:g}")
    ax.set_xlabel("attempt (sorted)")
    ax.set_ylabel("coefficient of difference")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out_dir / "coefficients.svg")


def _time_axis(n, rate):
    return [i / rate for i in range(n)]


def plot_attempt(row, traces: dict, out_dir: Path) -> Path:
    """Registered vs probe heart rate and EEG band for one attempt."""
    ref = traces["templates"][f"{row.template_subject}/{row.template_music}"]
    prb = traces["probes"][row.probe_id]
    fig, (ax_hr, ax_eeg) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_hr.plot(_time_axis(len(ref["HeartRate"]), 2.0), ref["HeartRate"], label="registered")
    ax_hr.plot(_time_axis(len(prb["HeartRate"]), 2.0), prb["HeartRate"], label="probe")
    ax_hr.set_ylabel("heart rate (BPM)")
    ax_hr.legend(fontsize=8)
    band = ref.get("band", "EEG")
    ax_eeg.plot(_time_axis(len(ref["values"]), 1.0), ref["values"], label="registered")
    ax_eeg.plot(_time_axis(len(prb["values"]), 1.0), prb["values"], label="probe")
    ax_eeg.set_ylabel(f"{band} power")
    ax_eeg.set_xlabel("time (s)")
    fig.suptitle(f"{row.category.value}: {row.template_subject}/{row.template_music} vs {row.probe_id}"
                 f"  (total {row.total:.3f})", fontsize=9)
    fig.tight_layout()
    return _save(fig, out_dir / f"attempt_{row.category.value}.svg")


def plot_report(report_path, out_dir, threshold: float = 2.0) -> list:
    """Coefficient chart plus, when the traces sidecar exists, the
    best-scoring attempt of each category."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = read_report(Path(report_path).read_text(encoding="utf-8"))
    written = [plot_coefficients(rows, out_dir, threshold)]
    side = sidecar_path(report_path)
    if side.exists():
        traces = json.loads(side.read_text(encoding="utf-8"))
        for cat in CATEGORY_ORDER:
            first = next((r for r in rows if r.category is cat and math.isfinite(r.total)), None)
            if first is not None:
                written.append(plot_attempt(first, traces, out_dir))
    return written
