"""Command-line front end. Run ``rffp <command> --help`` for details."""
import argparse
import csv
import io
import json
import os
import sys

from . import dataset_io as dio
from . import pipeline as pl
from ._kernels import METRICS
from ._util import atomic_write_text
from .catalog import load_catalog
from .compress import TrainConfig
from .errors import RffpError
from .hierarchy import read_tree
from .wavelet import CwtConfig, cwt, render_scalogram


class UsageError(Exception):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _resolve(args, cfg, defaults):
    """Flag value if given, else config value, else default."""
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, default)
    unknown = set(cfg) - set(defaults) - {"emd", "cwt", "wst", "cwt_part", "train"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return out


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return "%.12g" % v if isinstance(v, float) else v


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _run_log(out, command, resolved):
    base = out.rstrip("/")
    path = os.path.join(base, "run_log.json") if os.path.isdir(base) else base + ".run_log.json"
    atomic_write_text(path, _json({"command": command, "resolved": resolved}))


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args, cfg):
    r = _resolve(args, cfg, {"classes": None, "per_class": 50, "snr": 30.0, "slice_length": 1024,
                             "slices_per_parent": 4, "splits": "0.7,0.1,0.2", "seed": 0})
    if r["classes"] is None:
        raise UsageError("--classes is required")
    try:
        splits = tuple(float(v) for v in str(r["splits"]).split(","))
    except ValueError:
        raise UsageError(f"bad --splits {r['splits']!r}") from None
    if r["per_class"] < 1:
        raise UsageError("--per-class must be >= 1")
    specs = load_catalog(r["classes"])
    out = _ensure_dir(args.out)
    m = dio.build_corpus(specs, r["per_class"], r["snr"], r["seed"], out, r["slice_length"],
                         r["slices_per_parent"], splits)
    r["splits"] = list(splits)
    _run_log(out, "generate", r)
    counts = {s: len(m.split(s)) for s in dio.SPLITS}
    print(f"wrote {len(m.entries)} slices from {len(specs)} classes to {out} "
          f"(train {counts['train']}, validation {counts['validation']}, test {counts['test']})")


def _method_config(cfg):
    return {k: cfg[k] for k in ("emd", "cwt", "wst", "cwt_part") if k in cfg}


def cmd_extract(args, cfg):
    r = _resolve(args, cfg, {"manifest": None, "method": "hht-wpt", "split": None, "snr": None})
    if r["method"] not in pl.METHODS:
        raise UsageError(f"unknown method {r['method']!r}")
    pl.make_extractor(r["method"], _method_config(cfg))  # validates sub-configs
    m = dio.read_manifest(r["manifest"])
    if r["snr"] is not None:
        m = dio.resnr_manifest(m, r["snr"])
    entries = m.split(r["split"]) if r["split"] else None
    table = pl.extract_features(m, r["method"], _method_config(cfg), entries)
    dio.write_features(args.out, table)
    r["method_config"] = _method_config(cfg)
    _run_log(args.out, "extract", r)
    print(f"wrote {table.values.shape[0]} rows x {table.values.shape[1]} features ({table.source}) to {args.out}")


def _train_config(args, cfg, seed):
    base = dict(cfg.get("train", {}))
    for key in ("epochs", "learning_rate", "batch_size"):
        if getattr(args, key, None) is not None:
            base[key] = getattr(args, key)
    base["seed"] = seed
    if "corruption_snr_range_db" in base:
        base["corruption_snr_range_db"] = tuple(base["corruption_snr_range_db"])
    if "layer_sizes" in base:
        base["layer_sizes"] = tuple(base["layer_sizes"])
    try:
        return TrainConfig(**base)
    except TypeError as exc:
        raise UsageError(f"bad training config: {exc}") from None


def cmd_train_detector(args, cfg):
    r = _resolve(args, cfg, {"manifest": None, "known": None, "k": 20, "metric": "manhattan",
                             "quantile": 0.95, "seed": 0})
    if r["metric"] not in METRICS:
        raise UsageError(f"unknown metric {r['metric']!r}")
    tc = _train_config(args, cfg, r["seed"])
    known = tuple(r["known"].split("/")) if r["known"] else None
    m = dio.read_manifest(r["manifest"])
    progress = None
    if args.verbose:
        progress = lambda e, tl, vl: print(f"epoch {e + 1}: train {tl:.5f} validation {vl}", file=sys.stderr)
    det = pl.train_detector(m, tc, r["k"], r["metric"], r["quantile"], known, progress)
    pl.save_detector(args.out, det)
    r["train"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(tc).items()}
    _run_log(args.out, "train-detector", r)
    print(f"detector: {len(det.known_paths)} known classes, {det.meta['n_reference']} reference codes, "
          f"threshold {det.lof.threshold:.6g}, final train MAE {det.sdae.train_meta['final_train_loss']:.5g}")


def cmd_detect(args, cfg):
    r = _resolve(args, cfg, {"model": None, "manifest": None, "split": "test"})
    det = pl.load_detector(r["model"])
    m = dio.read_manifest(r["manifest"])
    rep = pl.detect(det, m, r["split"])
    out = _ensure_dir(args.out)
    rows = [[i, "/".join(p), t, d, _fmt(float(s))]
            for i, p, t, d, s in zip(rep.ids, rep.label_paths, rep.truth, rep.decisions, rep.scores)]
    atomic_write_text(os.path.join(out, "detections.csv"),
                      _csv_text(["id", "label_path", "truth", "decision", "lof_score"], rows))
    atomic_write_text(os.path.join(out, "summary.json"), _json(rep.metrics))
    _run_log(out, "detect", r)
    print(f"detection accuracy {rep.accuracy:.4f} on {len(rep.ids)} signals")
    for cls in ("inlier", "outlier"):
        pc = rep.metrics["per_class"].get(cls)
        if pc:
            print(f"  {cls}: precision {pc['precision']:.4f} recall {pc['recall']:.4f} f1 {pc['f1']:.4f}")


def cmd_train_hc(args, cfg):
    r = _resolve(args, cfg, {"features": None, "tree": None, "root": None, "k": 5,
                             "confidence_floor": 0.0, "standardize": True})
    if not 0.0 <= r["confidence_floor"] <= 1.0:
        raise UsageError("--confidence-floor must lie in [0, 1]")
    if args.no_standardize:
        r["standardize"] = False
    table = dio.read_features(r["features"])
    tree = read_tree(r["tree"]) if r["tree"] else None
    idf = pl.train_hc(table, tree, r["root"], r["k"], r["confidence_floor"], r["standardize"])
    pl.save_identifier(args.out, idf)
    _run_log(args.out, "train-hc", r)
    print(f"cascade over root {idf.cascade.tree.root!r}: {len(idf.cascade.node_classifiers)} node classifiers, "
          f"{idf.meta['n_train']} training rows")


def cmd_identify(args, cfg):
    r = _resolve(args, cfg, {"model": None, "features": None, "split": "test", "confidence_floor": None})
    idf = pl.load_identifier(r["model"])
    table = dio.read_features(r["features"])
    rep = pl.identify(idf, table, r["split"], r["confidence_floor"])
    out = _ensure_dir(args.out)
    rows = [[i, "/".join(t), "/".join(p.labels), ";".join(_fmt(c) for c in p.confidences)]
            for i, t, p in zip(rep.ids, rep.true_paths, rep.predictions)]
    atomic_write_text(os.path.join(out, "predictions.csv"),
                      _csv_text(["id", "true_path", "predicted_path", "confidences"], rows))
    node_rows = []
    for node in sorted(rep.node_metrics):
        for cls, pc in sorted(rep.node_metrics[node]["per_class"].items()):
            node_rows.append([node, cls] + [pc[k] for k in ("tp", "fp", "fn", "tn")]
                             + [_fmt(pc[k]) for k in ("accuracy", "precision", "recall", "f1")])
    atomic_write_text(os.path.join(out, "node_metrics.csv"),
                      _csv_text(["node", "class", "tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"],
                                node_rows))
    level_rows = [[l["level"], l["n"], _fmt(l["accuracy"]), _fmt(l["hP"]), _fmt(l["hR"]), _fmt(l["hF"]),
                   l["empty_predictions"]] for l in rep.levels]
    atomic_write_text(os.path.join(out, "level_metrics.csv"),
                      _csv_text(["level", "n", "accuracy", "hP", "hR", "hF1", "empty"], level_rows))
    summary = {"leaf_accuracy": rep.leaf_accuracy, "levels": rep.levels,
               "nodes": {n: {"accuracy": v["accuracy"], "macro": v["macro"]} for n, v in rep.node_metrics.items()}}
    atomic_write_text(os.path.join(out, "report.json"), _json(summary))
    _run_log(out, "identify", r)
    print(f"leaf accuracy {rep.leaf_accuracy:.4f} on {len(rep.ids)} signals")
    for l in rep.levels:
        print(f"  level {l['level']}: accuracy {l['accuracy']:.4f} hP {l['hP']:.4f} hR {l['hR']:.4f} hF1 {l['hF']:.4f}")


def cmd_snr_sweep(args, cfg):
    r = _resolve(args, cfg, {"manifest": None, "model": None, "stage": "detect", "snrs": None,
                             "method": "hht-wpt", "split": "test"})
    if r["stage"] not in ("detect", "identify"):
        raise UsageError(f"unknown stage {r['stage']!r}")
    snrs = r["snrs"] if r["snrs"] is not None else list(pl.DEFAULT_SWEEP_SNRS)
    if isinstance(snrs, str):
        try:
            snrs = [float(v) for v in snrs.split(",")]
        except ValueError:
            raise UsageError(f"bad --snrs {snrs!r}") from None
    if not snrs:
        raise UsageError("--snrs is empty")
    r["snrs"] = [float(s) for s in snrs]
    m = dio.read_manifest(r["manifest"])
    if r["stage"] == "detect":
        rows = pl.snr_sweep(m, r["snrs"], detector=pl.load_detector(r["model"]), split=r["split"])
    else:
        rows = pl.snr_sweep(m, r["snrs"], identifier=pl.load_identifier(r["model"]), method=r["method"],
                            config=_method_config(cfg), split=r["split"])
    header = list(rows[0])
    atomic_write_text(args.out, _csv_text(header, [[_fmt(row[h]) for h in header] for row in rows]))
    _run_log(args.out, "snr-sweep", r)
    for row in rows:
        print(f"snr {row['snr_db']:6.1f} dB: accuracy {row['accuracy']:.4f}")


def cmd_render_scalogram(args, cfg):
    r = _resolve(args, cfg, {"signal": None, "manifest": None, "entry": None, "snr": None})
    if (r["signal"] is None) == (r["manifest"] is None):
        raise UsageError("give exactly one of --signal or --manifest/--entry")
    if r["signal"]:
        sig = dio.read_signal(r["signal"])
    else:
        if r["entry"] is None:
            raise UsageError("--entry is required with --manifest")
        m = dio.read_manifest(r["manifest"])
        if r["snr"] is not None:
            m = dio.resnr_manifest(m, r["snr"])
        match = [e for e in m.entries if e.id == r["entry"]]
        if not match:
            raise UsageError(f"no entry {r['entry']!r} in {r['manifest']}")
        sig = dio.materialize(m, match[0])
    scal = cwt(sig, CwtConfig(**cfg.get("cwt", {})))
    render_scalogram(scal, args.out)
    rows, cols = scal.energy.shape
    print(f"wrote {cols}x{rows} scalogram to {args.out}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="rffp", description="RF fingerprinting pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, out_help):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
        sp.add_argument("--config", default=None, help="JSON file of parameter overrides")
        sp.add_argument("--out", required=True, help=out_help)
        sp.set_defaults(func=func)
        return sp

    sp = command("generate", cmd_generate, "build a synthetic corpus", "output directory")
    sp.add_argument("--classes", help="builtin:<uas|recognized|all>, a .json catalogue or a tree file")
    sp.add_argument("--per-class", type=int, help="parent captures per class (default 50)")
    sp.add_argument("--snr", type=float, help="capture SNR in dB (default 30)")
    sp.add_argument("--slice-length", type=int)
    sp.add_argument("--slices-per-parent", type=int)
    sp.add_argument("--splits", help="train,validation,test fractions (default 0.7,0.1,0.2)")

    sp = command("extract", cmd_extract, "compute a feature CSV", "feature CSV path")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--method", choices=pl.METHODS)
    sp.add_argument("--split", choices=dio.SPLITS)
    sp.add_argument("--snr", type=float, help="re-corrupt at this SNR before extracting")

    sp = command("train-detector", cmd_train_detector, "train the SDAE-LOF detector", "model descriptor path")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--known", help="label prefix of the recognized classes, e.g. Recognized")
    sp.add_argument("--k", type=int)
    sp.add_argument("--metric", choices=METRICS)
    sp.add_argument("--quantile", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--verbose", action="store_true")

    sp = command("detect", cmd_detect, "run the detector over a corpus split", "report directory")
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--split", choices=dio.SPLITS)

    sp = command("train-hc", cmd_train_hc, "train the hierarchical classifier", "model descriptor path")
    sp.add_argument("--features", required=True)
    sp.add_argument("--tree", help="tree file of 'parent child' lines (default: spanned by the labels)")
    sp.add_argument("--root", help="train only on paths under this root")
    sp.add_argument("--k", type=int)
    sp.add_argument("--confidence-floor", type=float)
    sp.add_argument("--no-standardize", action="store_true")

    sp = command("identify", cmd_identify, "evaluate the hierarchical classifier", "report directory")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--split", choices=dio.SPLITS)
    sp.add_argument("--confidence-floor", type=float)

    sp = command("snr-sweep", cmd_snr_sweep, "evaluate a model across SNRs", "CSV path")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--stage", choices=("detect", "identify"))
    sp.add_argument("--snrs", help="comma-separated SNRs in dB (default 30..0 step 5 and -8)")
    sp.add_argument("--method", choices=pl.METHODS, help="feature method of an identify model")
    sp.add_argument("--split", choices=dio.SPLITS)

    sp = command("render-scalogram", cmd_render_scalogram, "render a CWT scalogram as PGM", "PGM path")
    sp.add_argument("--signal", help="an .rfs signal file")
    sp.add_argument("--manifest")
    sp.add_argument("--entry", help="manifest entry id")
    sp.add_argument("--snr", type=float)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rffp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (RffpError, OSError, ValueError) as exc:
        print(f"rffp {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
