"""Experiment report emission: JSON, delimited tables, and rendered figures.

Every run lands in a directory named by the config hash and seed, holding
resolved_config.json (enough to reproduce the run), report.json, CSV
tables, sample spectrogram images, and PNG charts.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .csi import ActivityLabel
from .doppler import DopplerTrace, trace_to_pgm
from .pipeline import ExperimentReport, MetricsReport

#: Published reference results for the real-capture 20/40/80 MHz runs,
#: used by the comparison harness when converted data is supplied.
REFERENCE_METRICS = {
    20: {"inception": {"accuracy": 73.22, "precision": 80.57, "recall": 73.58, "f1": 70.65},
         "ibis": {"accuracy": 89.27, "precision": 90.18, "recall": 89.07, "f1": 89.23}},
    40: {"inception": {"accuracy": 86.48, "precision": 88.80, "recall": 86.29, "f1": 86.36},
         "ibis": {"accuracy": 94.13, "precision": 94.84, "recall": 94.04, "f1": 93.83}},
    80: {"inception": {"accuracy": 88.17, "precision": 91.47, "recall": 87.87, "f1": 88.26},
         "ibis": {"accuracy": 95.13, "precision": 95.57, "recall": 95.30, "f1": 95.21}},
}

_CLASS_NAMES = [label.name.title() for label in ActivityLabel]


def config_hash(document: dict) -> str:
    blob = json.dumps(document, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def run_directory(out_root, document: dict, seed: int) -> str:
    path = os.path.join(out_root, f"{config_hash(document)}-seed{seed}")
    os.makedirs(path, exist_ok=True)
    return path


def _metrics_dict(m: MetricsReport) -> dict:
    return m.as_dict()


def report_as_dict(report: ExperimentReport) -> dict:
    bands = {}
    for bw, band in report.bands.items():
        bands[str(bw)] = {
            "ibis": _metrics_dict(band.ibis),
            "inception": _metrics_dict(band.inception),
            "ibis_confusion": band.ibis_confusion.counts.tolist(),
            "inception_confusion": band.inception_confusion.counts.tolist(),
            "repetitions": [
                {
                    "rep": r.rep,
                    "ibis": _metrics_dict(r.ibis),
                    "inception": _metrics_dict(r.inception),
                    "grid_best": None if r.grid is None else {
                        "kernel": r.grid.best.kernel,
                        "C": r.grid.best.C,
                        "gamma": r.grid.best.gamma,
                        "cv_accuracy": r.grid.best_accuracy,
                    },
                }
                for r in band.repetitions
            ],
        }
    return {
        "kind": report.kind,
        "seed": report.seed,
        "repetitions": report.repetitions,
        "antenna_count": report.antenna_count,
        "bands": bands,
    }


def reference_comparison(report: ExperimentReport) -> dict:
    """Achieved-vs-reference deltas per bandwidth and model."""
    out = {}
    for bw, band in report.bands.items():
        if bw not in REFERENCE_METRICS:
            continue
        entry = {}
        for model in ("inception", "ibis"):
            achieved = getattr(band, model)
            ref = REFERENCE_METRICS[bw][model]
            entry[model] = {
                key: {"achieved": getattr(achieved, key), "reference": ref[key],
                      "delta": getattr(achieved, key) - ref[key]}
                for key in ("accuracy", "precision", "recall", "f1")
            }
        out[str(bw)] = entry
    return out


# --- delimited outputs -------------------------------------------------------


def metrics_csv(reports: dict[str, ExperimentReport]) -> str:
    lines = ["kind,bandwidth_mhz,model,accuracy,precision,recall,f1"]
    for kind, report in reports.items():
        for bw in sorted(report.bands):
            band = report.bands[bw]
            for model in ("inception", "ibis"):
                m = getattr(band, model)
                lines.append(f"{kind},{bw},{model},{m.accuracy:.4f},"
                             f"{m.precision:.4f},{m.recall:.4f},{m.f1:.4f}")
    return "\n".join(lines) + "\n"


def confusion_csv(counts: np.ndarray) -> str:
    header = "true\\pred," + ",".join(_CLASS_NAMES)
    lines = [header]
    for i, name in enumerate(_CLASS_NAMES):
        lines.append(name + "," + ",".join(str(int(v)) for v in counts[i]))
    return "\n".join(lines) + "\n"


def gridsearch_csv(report: ExperimentReport) -> str:
    lines = ["bandwidth_mhz,rep,kernel,C,gamma,cv_accuracy,selected"]
    for bw in sorted(report.bands):
        for r in report.bands[bw].repetitions:
            if r.grid is None:
                continue
            best = (r.grid.best.kernel, r.grid.best.C, r.grid.best.gamma)
            for (kernel, c, gamma), acc in sorted(r.grid.surface.items()):
                sel = int((kernel, c, gamma) == best)
                lines.append(f"{bw},{r.rep},{kernel},{c},{gamma},{acc:.4f},{sel}")
    return "\n".join(lines) + "\n"


def sweep_csv(sweep: dict[int, dict[int, MetricsReport]]) -> str:
    lines = ["bandwidth_mhz,antennas,accuracy,precision,recall,f1"]
    for bw in sorted(sweep):
        for k in sorted(sweep[bw]):
            m = sweep[bw][k]
            lines.append(f"{bw},{k},{m.accuracy:.4f},{m.precision:.4f},"
                         f"{m.recall:.4f},{m.f1:.4f}")
    return "\n".join(lines) + "\n"


def comparison_csv(comparison: dict) -> str:
    lines = ["bandwidth_mhz,model,metric,achieved,reference,delta"]
    for bw in sorted(comparison, key=int):
        for model, metrics in comparison[bw].items():
            for metric, row in metrics.items():
                lines.append(f"{bw},{model},{metric},{row['achieved']:.4f},"
                             f"{row['reference']:.4f},{row['delta']:+.4f}")
    return "\n".join(lines) + "\n"


# --- figures ------------------------------------------------------------------


def fig_accuracy_by_bandwidth(report: ExperimentReport, path) -> None:
    bws = sorted(report.bands)
    incep = [report.bands[bw].inception.accuracy for bw in bws]
    ibis = [report.bands[bw].ibis.accuracy for bw in bws]
    x = np.arange(len(bws))
    fig, ax = plt.subplots(figsize=(5, 3.4))
    ax.bar(x - 0.18, incep, 0.36, label="Inception")
    ax.bar(x + 0.18, ibis, 0.36, label="IBIS")
    ax.set_xticks(x, [f"{bw} MHz" for bw in bws])
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_antenna_sweep(sweep: dict[int, dict[int, MetricsReport]], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for bw in sorted(sweep):
        ks = sorted(sweep[bw])
        ax.plot(ks, [sweep[bw][k].accuracy for k in ks], marker="o", label=f"{bw} MHz")
    ax.set_xlabel("antennas fused")
    ax.set_ylabel("accuracy (%)")
    ax.set_xticks(sorted(next(iter(sweep.values()))))
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_ablations(reports: dict[str, ExperimentReport], path) -> None:
    kinds = [k for k in ("full", "no_doppler", "no_svm") if k in reports]
    bws = sorted(next(iter(reports.values())).bands)
    x = np.arange(len(bws))
    width = 0.8 / max(len(kinds), 1)
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    for i, kind in enumerate(kinds):
        accs = [reports[kind].bands[bw].ibis.accuracy for bw in bws]
        ax.bar(x + (i - (len(kinds) - 1) / 2) * width, accs, width, label=kind)
    ax.set_xticks(x, [f"{bw} MHz" for bw in bws])
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_confusion(counts: np.ndarray, path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(4.4, 4))
    share = counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
    im = ax.imshow(share, cmap="Blues", vmin=0, vmax=1)
    ax.set_xticks(range(5), _CLASS_NAMES, rotation=45, ha="right")
    ax.set_yticks(range(5), _CLASS_NAMES)
    for i in range(5):
        for j in range(5):
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center",
                    color="black" if share[i, j] < 0.5 else "white", fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_spectrograms(traces: list[DopplerTrace], path) -> None:
    """One panel per trace; expects one representative trace per class."""
    fig, axes = plt.subplots(1, len(traces), figsize=(2.4 * len(traces), 2.8))
    if len(traces) == 1:
        axes = [axes]
    for ax, trace in zip(axes, traces):
        v = trace.velocity_axis
        ax.imshow(trace.power, aspect="auto", origin="lower", cmap="viridis",
                  extent=(v[0], v[-1], 0, trace.duration_s))
        ax.set_title("" if trace.label is None else trace.label.name.title(), fontsize=9)
        ax.set_xlabel("velocity (m/s)", fontsize=8)
    axes[0].set_ylabel("time (s)", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# --- assembly -------------------------------------------------------------------


def write_run_outputs(run_dir, document: dict,
                      reports: dict[str, ExperimentReport],
                      sweep: dict[int, dict[int, MetricsReport]] | None = None,
                      spectrograms: list[DopplerTrace] | None = None) -> dict:
    """Emit every artifact for a finished run; returns the report document."""
    figures_dir = os.path.join(run_dir, "figures")
    os.makedirs(figures_dir, exist_ok=True)

    with open(os.path.join(run_dir, "resolved_config.json"), "w") as fh:
        json.dump(document, fh, indent=2, sort_keys=True)

    main = reports.get("full") or next(iter(reports.values()))
    doc = {
        "runs": {kind: report_as_dict(r) for kind, r in reports.items()},
        "reference_comparison": reference_comparison(main),
        "antenna_sweep": None if sweep is None else {
            str(bw): {str(k): _metrics_dict(m) for k, m in per_k.items()}
            for bw, per_k in sweep.items()
        },
    }
    with open(os.path.join(run_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2)

    with open(os.path.join(run_dir, "metrics.csv"), "w") as fh:
        fh.write(metrics_csv(reports))
    with open(os.path.join(run_dir, "reference_comparison.csv"), "w") as fh:
        fh.write(comparison_csv(doc["reference_comparison"]))
    for kind, report in reports.items():
        for bw, band in report.bands.items():
            for model in ("ibis", "inception"):
                cm = getattr(band, f"{model}_confusion")
                name = f"confusion_{kind}_{bw}mhz_{model}.csv"
                with open(os.path.join(run_dir, name), "w") as fh:
                    fh.write(confusion_csv(cm.counts))
        if any(r.grid is not None for band in report.bands.values()
               for r in band.repetitions):
            with open(os.path.join(run_dir, f"gridsearch_{kind}.csv"), "w") as fh:
                fh.write(gridsearch_csv(report))
    if sweep is not None:
        with open(os.path.join(run_dir, "antenna_sweep.csv"), "w") as fh:
            fh.write(sweep_csv(sweep))

    fig_accuracy_by_bandwidth(main, os.path.join(figures_dir, "accuracy_by_bandwidth.png"))
    if len(reports) > 1:
        fig_ablations(reports, os.path.join(figures_dir, "ablations.png"))
    if sweep is not None:
        fig_antenna_sweep(sweep, os.path.join(figures_dir, "antenna_sweep.png"))
    for bw, band in main.bands.items():
        fig_confusion(band.ibis_confusion.counts,
                      os.path.join(figures_dir, f"confusion_{bw}mhz.png"),
                      f"IBIS, {bw} MHz")
    if spectrograms:
        fig_spectrograms(spectrograms, os.path.join(figures_dir, "spectrograms.png"))
        spect_dir = os.path.join(run_dir, "spectrograms")
        os.makedirs(spect_dir, exist_ok=True)
        for trace in spectrograms:
            label = "unlabeled" if trace.label is None else trace.label.name.lower()
            with open(os.path.join(spect_dir, f"{label}_ant{trace.antenna_id}.pgm"), "wb") as fh:
                fh.write(trace_to_pgm(trace))
    return doc
