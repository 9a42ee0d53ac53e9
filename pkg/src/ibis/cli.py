"""Command-line interface.

Subcommands: synth, sanitize, doppler, train, gridsearch, eval, experiment,
ablate, sweep-antennas, inspect. Exit codes: 0 success, 1 usage error,
2 data error. Verbosity comes from IBIS_LOG={error|info|debug}.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import csif
from .config import RunConfig, default_config, load_config
from .csi import ActivityLabel, extract_subband
from .doppler import (inspect_dopp, trace_to_csv, trace_to_pgm, doppler_trace,
                      write_dopp_file)
from .errors import BadMagic, IbisError
from .nn import (init_hybrid, parse_checkpoint_file, predict_proba, train,
                 write_checkpoint_file)
from .pipeline import (ExperimentConfig, Prediction, ablate, evaluate,
                       majority_vote, no_svm_from_report, prepare_band_inputs,
                       run_experiment, sweep_from_report)
from .report import run_directory, write_run_outputs
from .sanitize import raw_phase_matrix, sanitize_recording
from .svm import fit_multiclass, grid_search, predict_votes
from .synth import SynthConfig, iter_synthetic_samples

log = logging.getLogger("ibis")


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _setup_logging() -> None:
    level = os.environ.get("IBIS_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else default_config()
    doc = cfg.document
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        doc["threads"] = args.threads
    if getattr(args, "reflection_factor", None) is not None:
        doc["synth"]["reflection_factor"] = args.reflection_factor
        doc["doppler"]["reflection_factor"] = args.reflection_factor
    bw = getattr(args, "bandwidth", None)
    if bw and bw != "all":
        doc["bandwidths"] = [int(bw)]
    from .config import resolve_config

    return resolve_config(doc)


# --- data loading helpers ------------------------------------------------------


def _single_band_inputs(args, cfg: RunConfig, bandwidth: int | None = None):
    """Traces for one bandwidth from --data (CSIF) or the synth config.

    Without an explicit --bandwidth the data's native width is used.
    """
    ecfg = cfg.experiment_config()
    if getattr(args, "data", None):
        data = csif.parse_csif_file(args.data)
        native = data.samples[0].recordings[0].layout.bandwidth_mhz
    else:
        data = cfg.synth_config()
        native = data.bandwidth_mhz
    ecfg = dataclasses.replace(ecfg, bandwidths=(bandwidth or native,))
    inputs = prepare_band_inputs(data, ecfg, with_phases=False)
    return inputs[ecfg.bandwidths[0]], ecfg


def _select_recording(dataset, sample: int, antenna: int):
    for s in dataset.samples:
        if s.sample_id == sample:
            for rec in s.recordings:
                if rec.antenna_id == antenna:
                    return rec
    raise IbisError(f"no recording for sample {sample}, antenna {antenna}")


# --- subcommand handlers ----------------------------------------------------------


def _cmd_synth(args) -> int:
    cfg = _load_run_config(args)
    doc = cfg.document["synth"]
    for attr, key in (("samples_per_class", "samples_per_class"),
                      ("antennas", "antenna_count"),
                      ("snr_db", "snr_db"), ("duration", "duration_s"),
                      ("packet_rate", "packet_rate_hz"),
                      ("center_freq", "center_freq_hz")):
        val = getattr(args, attr, None)
        if val is not None:
            doc[key] = val
    if args.bandwidth and args.bandwidth != "all":
        doc["bandwidth_mhz"] = int(args.bandwidth)
    scfg = cfg.synth_config()
    scfg.validate()
    num_frames = int(round(scfg.duration_s * scfg.packet_rate_hz))
    metas = []
    for label in ActivityLabel:
        for idx in range(scfg.samples_per_class):
            metas.append({
                "sample_id": int(label) * scfg.samples_per_class + idx,
                "label_code": int(label),
                "center_freq_hz": scfg.center_freq_hz,
                "packet_rate_hz": scfg.packet_rate_hz,
                "bandwidth_mhz": scfg.bandwidth_mhz,
                "num_frames": num_frames,
            })
    csif.stream_write_csif(args.out, scfg.antenna_count,
                           iter_synthetic_samples(scfg), metas)
    print(f"wrote {len(metas)} samples x {scfg.antenna_count} antennas to {args.out}")
    return 0


def _cmd_sanitize(args) -> int:
    dataset = csif.parse_csif_file(args.infile)
    arrays, names = {}, []
    for sample in dataset.samples:
        for rec in sample.recordings:
            pm = sanitize_recording(rec, args.lasso_lambda)
            key = f"s{sample.sample_id}_a{rec.antenna_id}"
            arrays[f"phase_{key}"] = pm.values
            arrays[f"active_{key}"] = pm.active_indices
            names.append(key)
    arrays["packet_rate_hz"] = np.array(dataset.recordings[0].packet_rate_hz)
    np.savez_compressed(args.out, **arrays)
    print(f"sanitized {len(names)} recordings -> {args.out}")
    return 0


def _cmd_doppler(args) -> int:
    cfg = _load_run_config(args)
    dataset = csif.parse_csif_file(args.infile)
    rec = _select_recording(dataset, args.sample, args.antenna)
    dcfg = cfg.doppler_settings().as_doppler_config(rec.center_freq_hz)
    pm = raw_phase_matrix(rec) if args.raw_phase else \
        sanitize_recording(rec, args.lasso_lambda)
    trace = doppler_trace(pm, dcfg, label=rec.label, antenna_id=rec.antenna_id)
    write_dopp_file(args.out, trace)
    outputs = [args.out]
    if args.pgm:
        with open(args.pgm, "wb") as fh:
            fh.write(trace_to_pgm(trace))
        outputs.append(args.pgm)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(trace_to_csv(trace))
        outputs.append(args.csv)
    print(f"wrote {', '.join(outputs)}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_run_config(args)
    bw = None if not args.bandwidth or args.bandwidth == "all" else int(args.bandwidth)
    inputs, ecfg = _single_band_inputs(args, cfg, bw)
    x = np.cbrt(inputs.traces).reshape(-1, *inputs.traces.shape[2:])
    y = np.repeat(inputs.labels, inputs.antenna_count)
    model = init_hybrid(x.shape[2], ecfg.model.filters, ecfg.model.pool_filters,
                        ecfg.model.hidden, seed=ecfg.seed)
    tcfg = dataclasses.replace(ecfg.train, seed=ecfg.seed)
    model, history = train(model, (x, y), tcfg)
    probs = predict_proba(model, x)
    result = grid_search((probs, y), ecfg.svm_grid, k=ecfg.svm_folds, seed=ecfg.seed)
    svm = fit_multiclass(probs, y, result.best)
    write_checkpoint_file(args.out, model, svm)
    print(f"trained on {len(x)} traces, final loss {history[-1]:.4f}, "
          f"svm {result.best.kernel} C={result.best.C} gamma={result.best.gamma} "
          f"-> {args.out}")
    return 0


def _cmd_gridsearch(args) -> int:
    cfg = _load_run_config(args)
    bw = None if not args.bandwidth or args.bandwidth == "all" else int(args.bandwidth)
    inputs, ecfg = _single_band_inputs(args, cfg, bw)
    model, _ = parse_checkpoint_file(args.model)
    x = np.cbrt(inputs.traces).reshape(-1, *inputs.traces.shape[2:])
    y = np.repeat(inputs.labels, inputs.antenna_count)
    result = grid_search((predict_proba(model, x), y), ecfg.svm_grid,
                         k=ecfg.svm_folds, seed=ecfg.seed)
    doc = {
        "cv_folds": result.cv_folds,
        "best": {"kernel": result.best.kernel, "C": result.best.C,
                 "gamma": result.best.gamma, "cv_accuracy": result.best_accuracy},
        "surface": [
            {"kernel": k, "C": c, "gamma": g, "cv_accuracy": acc}
            for (k, c, g), acc in sorted(result.surface.items())
        ],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(f"best: {result.best.kernel} C={result.best.C} gamma={result.best.gamma} "
          f"({result.best_accuracy:.2f}%) -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    bw = None if not args.bandwidth or args.bandwidth == "all" else int(args.bandwidth)
    inputs, _ = _single_band_inputs(args, cfg, bw)
    model, svm = parse_checkpoint_file(args.model)
    n, a = inputs.traces.shape[:2]
    flat = np.cbrt(inputs.traces).reshape(-1, *inputs.traces.shape[2:])
    probs = predict_proba(model, flat).reshape(n, a, -1)
    if svm is not None:
        labels, _, _ = predict_votes(svm, probs.reshape(n * a, -1))
        labels = labels.reshape(n, a)
    else:
        labels = probs.argmax(axis=2)
    fused = []
    for s in range(n):
        preds = [Prediction(int(inputs.sample_ids[s]), ant, probs[s, ant],
                            ActivityLabel(int(labels[s, ant]))) for ant in range(a)]
        fused.append(majority_vote(preds))
    cm, metrics = evaluate(inputs.labels, fused)
    doc = {"metrics": metrics.as_dict(), "confusion": cm.counts.tolist(),
           "samples": int(n), "antennas": int(a)}
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(f"accuracy {metrics.accuracy:.2f}% on {n} samples -> {args.out}")
    return 0


def _example_traces(data, ecfg: ExperimentConfig):
    """First labeled sample of each class, antenna 0, widest bandwidth."""
    bw = max(ecfg.bandwidths)
    seen, traces = set(), []
    samples = iter_synthetic_samples(data) if isinstance(data, SynthConfig) \
        else iter(data.samples)
    for sample in samples:
        label = sample.label
        if label is None or int(label) in seen:
            continue
        seen.add(int(label))
        rec = extract_subband(sample.recordings[0], bw)
        pm = sanitize_recording(rec, ecfg.lasso_lambda)
        dcfg = ecfg.doppler.as_doppler_config(rec.center_freq_hz)
        traces.append(doppler_trace(pm, dcfg, label=label, antenna_id=0))
        if len(seen) == 5:
            break
    return sorted(traces, key=lambda t: int(t.label))


def _cmd_experiment(args) -> int:
    cfg = _load_run_config(args)
    ecfg = cfg.experiment_config()
    data = csif.parse_csif_file(args.data) if args.data else cfg.synth_config()
    inputs = prepare_band_inputs(data, ecfg, with_phases=args.ablations)
    antennas = next(iter(inputs.values())).antenna_count

    reports = {"full": run_experiment(data, ecfg, inputs=inputs)}
    if args.ablations:
        reports["no_doppler"] = ablate("no_doppler", data, ecfg, inputs=inputs)
        reports["no_svm"] = no_svm_from_report(reports["full"], ecfg)
    sweep = None
    if args.sweep_antennas:
        sweep = sweep_from_report(reports["full"], list(range(1, antennas + 1)))

    run_dir = run_directory(args.out, cfg.document, cfg.seed)
    write_run_outputs(run_dir, cfg.document, reports, sweep,
                      spectrograms=_example_traces(data, ecfg))
    for bw in sorted(reports["full"].bands):
        band = reports["full"].bands[bw]
        print(f"{bw} MHz: IBIS {band.ibis.accuracy:.2f}%  "
              f"Inception {band.inception.accuracy:.2f}%")
    print(f"artifacts in {run_dir}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_run_config(args)
    ecfg = cfg.experiment_config()
    data = csif.parse_csif_file(args.data) if args.data else cfg.synth_config()
    report = ablate(args.kind, data, ecfg)
    run_dir = run_directory(args.out, cfg.document, cfg.seed)
    write_run_outputs(run_dir, cfg.document, {args.kind: report})
    for bw in sorted(report.bands):
        print(f"{bw} MHz ({args.kind}): IBIS {report.bands[bw].ibis.accuracy:.2f}%")
    print(f"artifacts in {run_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_run_config(args)
    ecfg = cfg.experiment_config()
    data = csif.parse_csif_file(args.data) if args.data else cfg.synth_config()
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    report = run_experiment(data, ecfg)
    sweep = sweep_from_report(report, counts)
    run_dir = run_directory(args.out, cfg.document, cfg.seed)
    write_run_outputs(run_dir, cfg.document, {"full": report}, sweep)
    for bw in sorted(sweep):
        accs = {k: round(m.accuracy, 2) for k, m in sorted(sweep[bw].items())}
        print(f"{bw} MHz antennas->accuracy: {accs}")
    print(f"artifacts in {run_dir}")
    return 0


def _cmd_inspect(args) -> int:
    with open(args.file, "rb") as fh:
        blob = fh.read()
    magic = blob[:4]
    if magic == csif.MAGIC:
        header = csif.inspect_csif(blob)
        kind = "csif"
    elif magic == b"DOPP":
        header = inspect_dopp(blob)
        kind = "dopp"
    elif magic == b"IBN1":
        from .nn.checkpoint import parse_checkpoint

        model, svm = parse_checkpoint(blob)
        header = {
            "kind": model.kind,
            "parameters": {k: list(v.shape) for k, v in model.parameters().items()},
            "svm": None if svm is None else {
                "kernel": svm.hyper.kernel, "C": svm.hyper.C,
                "gamma": svm.hyper.gamma, "pairs": len(svm.models),
            },
        }
        kind = "checkpoint"
    else:
        raise BadMagic(f"unrecognized magic {magic!r}")
    print(json.dumps({"format": kind, "header": header}, indent=2))
    return 0


# --- argument wiring ---------------------------------------------------------------


def _add_common(p, bandwidth_all=True):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--threads", type=int, help="worker process cap")
    p.add_argument("--reflection-factor", type=int, choices=(1, 2),
                   dest="reflection_factor")
    choices = ("20", "40", "80", "all") if bandwidth_all else ("20", "40", "80")
    p.add_argument("--bandwidth", choices=choices)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ibis",
                     description="CSI activity-recognition toolkit: synthesis, "
                                 "sanitization, Doppler traces, training, and "
                                 "bandwidth experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", parents=[], help="generate a synthetic CSIF dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--samples-per-class", type=int, dest="samples_per_class")
    p.add_argument("--antennas", type=int)
    p.add_argument("--snr-db", type=float, dest="snr_db")
    p.add_argument("--duration", type=float)
    p.add_argument("--packet-rate", type=float, dest="packet_rate")
    p.add_argument("--center-freq", type=float, dest="center_freq")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sanitize", help="phase-sanitize a CSIF file into .npz matrices")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lasso_lambda", type=float, default=0.01)
    p.set_defaults(func=_cmd_sanitize)

    p = sub.add_parser("doppler", help="compute one Doppler trace (DOPP/PGM/CSV)")
    _add_common(p, bandwidth_all=False)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm")
    p.add_argument("--csv")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--antenna", type=int, default=0)
    p.add_argument("--lambda", dest="lasso_lambda", type=float, default=0.01)
    p.add_argument("--raw-phase", action="store_true", dest="raw_phase",
                   help="skip sanitization, use wrapped raw phase")
    p.set_defaults(func=_cmd_doppler)

    p = sub.add_parser("train", help="train the hybrid classifier plus SVM stage")
    _add_common(p)
    p.add_argument("--data", help="CSIF input (default: synthetic from config)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("gridsearch", help="SVM grid search on model probabilities")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gridsearch)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("experiment", help="full bandwidth experiment")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", required=True, help="output root directory")
    p.add_argument("--ablations", action="store_true",
                   help="also run no_doppler and no_svm")
    p.add_argument("--sweep-antennas", action="store_true", dest="sweep_antennas")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("ablate", help="run one ablation experiment")
    _add_common(p)
    p.add_argument("--kind", required=True, choices=("no_doppler", "no_svm"))
    p.add_argument("--data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("sweep-antennas", help="accuracy vs fused antenna count")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--out", required=True)
    p.add_argument("--counts", default="1,2,3,4")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("inspect", help="dump a CSIF/DOPP/checkpoint header")
    p.add_argument("file")
    p.set_defaults(func=_cmd_inspect)
    return parser


def dispatch(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except IbisError as exc:
        print(f"ibis {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ibis {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
