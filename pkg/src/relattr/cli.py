"""Command-line interface: ``relattr classify|attribute|analyze|render``.

Two helper subcommands build inputs for desk-scale runs: ``synth`` writes a
synthetic labelled dataset and ``make-model`` writes a fixture model.

Exit codes: 0 success, 2 usage error, 3 load failure, 4 compute failure,
5 render failure.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, io, render
from .analysis import (
    DEFAULT_THRESHOLDS, build_analysis, classify_with_threshold, format_report,
    recording_beat,
)
from .attribution import AttributionConfig, Method, attribute, method_check, relevance_propagation
from .nn import BATCHNORM, fold_batchnorm, load_model, predict, save_model
from .nn import fixtures
from .signal import NoPeaksError, SynthConfig, synth_ecg

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_LOAD = 3
EXIT_COMPUTE = 4
EXIT_RENDER = 5

CLASSIFICATION_FILE = "classification.csv"
CHECKS_FILE = "checks.csv"
REPORT_FILE = "analysis_report.txt"
ANALYSIS_FILE = "analysis.json"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def worker_count() -> int:
    """Worker threads, capped by ``RELATTR_THREADS`` when set."""
    default = min(4, os.cpu_count() or 1)
    env = os.environ.get("RELATTR_THREADS")
    if env is None:
        return default
    try:
        n = int(env)
    except ValueError:
        raise CliError(f"RELATTR_THREADS must be an integer, got {env!r}", EXIT_USAGE)
    return max(1, n)


def _map(fn, items):
    """Apply ``fn`` over ``items`` with the worker pool; results keep input order."""
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---- loading ------------------------------------------------------------------------

def _load_manifest(path):
    try:
        return io.load_manifest(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load manifest: {exc}", EXIT_LOAD)


def _load_model(path):
    try:
        return load_model(path)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load model {path}: {exc}", EXIT_LOAD)


def _load_recordings(manifest):
    def load(entry):
        try:
            rec = io.read_recording(entry.path)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load recording {entry.id}: {exc}", EXIT_LOAD)
        if rec.id != entry.id:
            raise CliError(f"recording {entry.path} has id {rec.id!r}, manifest says "
                           f"{entry.id!r}", EXIT_LOAD)
        if rec.label is not None and rec.label != entry.label:
            raise CliError(f"recording {entry.id}: file label {rec.label!r} differs from "
                           f"manifest label {entry.label!r}", EXIT_LOAD)
        rec.label = entry.label
        return rec
    return _map(load, list(manifest))


def resolve_class(model, name=None, index=None):
    """Return ``(class_index, class_name)`` for a ``--class`` name or index."""
    names = list(model.class_names) if model.class_names else None
    if index is not None:
        if not 0 <= index < model.output_dim:
            raise CliError(f"class index {index} out of range for {model.output_dim} "
                           "outputs", EXIT_USAGE)
        label = names[index] if names else str(index)
        return index, (name.upper() if name else label)
    if name is None:
        name = "af"
    if names:
        for i, n in enumerate(names):
            if n.lower() == name.lower():
                return i, n
    if model.output_dim == 1:
        return 0, name.upper()
    raise CliError(f"model has no class {name!r} (classes: {names})", EXIT_USAGE)


def _input_check(model, recordings):
    for rec in recordings:
        if rec.samples.shape != model.input_shape:
            raise CliError(f"recording {rec.id} shape {rec.samples.shape} does not match "
                           f"model input {model.input_shape}", EXIT_LOAD)


def _thresholds(args):
    return {"AF": args.threshold_af, "LBBB": args.threshold_lbbb}


def _write_snapshot(args, command, extra=None, attribution=None):
    cfg = io.RunConfig(
        command=command, model_path=getattr(args, "model", None),
        manifest_path=getattr(args, "manifest", None), attribution=attribution or [],
        thresholds=_thresholds(args) if hasattr(args, "threshold_af") else
        dict(DEFAULT_THRESHOLDS),
        target_class=getattr(args, "target", None),
        detection_lead=getattr(args, "detection_lead", "II"),
        analysis_lead=getattr(args, "lead", "II"), bins=getattr(args, "bins", 100),
        out_dir=args.out, extra=extra or {})
    io.write_run_config(cfg, args.out)


# ---- classify -----------------------------------------------------------------------

def _scores(model, recordings, batch=32):
    out = []
    for start in range(0, len(recordings), batch):
        chunk = np.stack([r.samples for r in recordings[start : start + batch]])
        out.append(predict(model, chunk, "linear"))
    return np.concatenate(out) if out else np.zeros((0, model.output_dim))


def _sigmoid(z):
    from .nn.ops import sigmoid
    return sigmoid(z)


def cmd_classify(args):
    manifest = _load_manifest(args.manifest)
    model = _load_model(args.model)
    recordings = _load_recordings(manifest)
    _input_check(model, recordings)
    try:
        linear = _scores(model, recordings)
    except (ValueError, FloatingPointError) as exc:
        raise CliError(f"classification failed: {exc}", EXIT_COMPUTE)
    prob = _sigmoid(linear)
    names = list(model.class_names) if model.class_names else [str(i) for i in
                                                               range(model.output_dim)]
    thresholds = _thresholds(args)
    decided = [(c, names.index(c)) for c in ("AF", "LBBB") if c in names]
    if not decided:
        idx, name = resolve_class(model, args.target)
        decided = [(name, idx)] if name in thresholds else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / CLASSIFICATION_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"] + [f"C_{n}" for n in names] + [f"linear_{n}" for n in names]
                   + [f"predicted_{c}" for c, _ in decided])
        for rec, lin, p in zip(recordings, linear, prob):
            preds = [int(classify_with_threshold(float(p[i]), c, thresholds))
                     for c, i in decided]
            w.writerow([rec.id, rec.label] + [f"{v:.17g}" for v in p] +
                       [f"{v:.17g}" for v in lin] + preds)
    _write_snapshot(args, "classify")
    print(f"classified {len(recordings)} recordings -> {out / CLASSIFICATION_FILE}")
    return EXIT_OK


# ---- attribute ----------------------------------------------------------------------

def _attribution_configs(args, class_index):
    methods = args.method or ["IG"]
    configs = []
    for m in methods:
        try:
            configs.append(AttributionConfig(
                method=Method.parse(m), class_index=class_index, steps=args.ig_steps,
                epsilon=args.epsilon, alpha=args.alpha, beta=args.beta,
                output_mode=args.output_mode))
        except ValueError as exc:
            raise CliError(str(exc), EXIT_USAGE)
    return configs


def cmd_attribute(args):
    manifest = _load_manifest(args.manifest)
    model = _load_model(args.model)
    class_index, class_name = resolve_class(model, args.target, args.class_index)
    configs = _attribution_configs(args, class_index)
    recordings = _load_recordings(manifest)
    _input_check(model, recordings)
    folded = None
    if any(c.method.is_lrp for c in configs):
        has_bn = any(layer.kind == BATCHNORM for layer in model.layers)
        try:
            folded = fold_batchnorm(model) if has_bn else model
        except ValueError as exc:
            raise CliError(f"cannot prepare model for LRP: {exc}", EXIT_COMPUTE)

    def work(rec):
        results = []
        for cfg in configs:
            try:
                if cfg.method.is_lrp:
                    res = relevance_propagation(folded, rec.samples, cfg, rec.id)
                    tensor, check = res.relevance, method_check(folded, rec.samples, cfg, res)
                else:
                    tensor = attribute(model, rec.samples, cfg, rec.id)
                    check = method_check(model, rec.samples, cfg, tensor)
            except (ValueError, IndexError) as exc:
                raise CliError(f"{cfg.method.value} failed on {rec.id}: {exc}", EXIT_COMPUTE)
            results.append((cfg, tensor, check))
        return results

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    n_files = 0
    # workers compute; every write happens here, in manifest order
    for rec, results in zip(recordings, _map(work, recordings)):
        for cfg, tensor, check in results:
            name = io.relevance_filename(rec.id, cfg.method, class_index, args.compress)
            io.write_relevance(tensor, out / name)
            n_files += 1
            rows.append([rec.id, cfg.method.value, name, json.dumps(check, sort_keys=True)])
    with open(out / CHECKS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "method", "file", "check"])
        w.writerows(rows)
    _write_snapshot(args, "attribute", extra={"class_index": class_index,
                                              "class_name": class_name},
                    attribution=[c.snapshot() for c in configs])
    print(f"wrote {n_files} relevance files to {out}")
    return EXIT_OK


# ---- analyze ------------------------------------------------------------------------

def _read_classification(path, target):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = {r["id"]: r for r in reader}
    except OSError as exc:
        raise CliError(f"cannot read classification file: {exc}", EXIT_LOAD)
    key = f"C_{target}"
    if rows and key not in next(iter(rows.values())):
        raise CliError(f"classification file has no column {key}", EXIT_LOAD)
    return {rid: (float(r[key]), float(r[f"linear_{target}"])) for rid, r in rows.items()}


def cmd_analyze(args):
    manifest = _load_manifest(args.manifest)
    method = Method.parse(args.method[0] if args.method else "IG")
    recordings = _load_recordings(manifest)
    if args.model:
        model = _load_model(args.model)
        class_index, target = resolve_class(model, args.target, args.class_index)
        _input_check(model, recordings)
        linear = _scores(model, recordings)[:, class_index] if recordings else []
        scores = {r.id: (float(_sigmoid(np.array([lin]))[0]), float(lin))
                  for r, lin in zip(recordings, linear)}
    elif args.classification:
        target = (args.target or "af").upper()
        scores = _read_classification(args.classification, target)
        class_index = args.class_index
    else:
        raise CliError("analyze needs --model or --classification", EXIT_USAGE)
    rel_dir = Path(args.relevance)
    index = _relevance_index(rel_dir, method, class_index)

    def load(rec):
        path = index.get(rec.id)
        if path is None:
            raise CliError(f"missing {method.value} relevance file for {rec.id} in {rel_dir}",
                           EXIT_LOAD)
        try:
            tensor = io.read_relevance(path, expected_shape=rec.samples.shape)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read relevance for {rec.id}: {exc}", EXIT_LOAD)
        try:
            beat = recording_beat(rec, tensor, args.lead, args.detection_lead)
        except NoPeaksError:
            beat = None
        return tensor, beat

    loaded = _map(load, recordings)
    rows, relevances, beats = [], {}, []
    thresholds = _thresholds(args)
    for rec, (tensor, beat) in zip(recordings, loaded):
        if rec.id not in scores:
            raise CliError(f"no classification score for {rec.id}", EXIT_LOAD)
        p, lin = scores[rec.id]
        predicted = (classify_with_threshold(p, target, thresholds)
                     if target in thresholds else p > 0.5)
        rows.append({"id": rec.id, "label": rec.label, "probability": p, "linear": lin,
                     "predicted": bool(predicted)})
        relevances[rec.id] = tensor.values
        if beat is not None:
            beats.append(beat)
    meta = {"method": method.value, "lead": args.lead, "detection_lead": args.detection_lead,
            "bins": args.bins}
    try:
        analysis = build_analysis(rows, relevances, beats, target, bins=args.bins,
                                  lead=args.lead, meta=meta)
    except ValueError as exc:
        raise CliError(f"analysis failed: {exc}", EXIT_COMPUTE)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_FILE).write_text(format_report(analysis), encoding="utf-8")
    (out / ANALYSIS_FILE).write_text(json.dumps(analysis, sort_keys=True) + "\n",
                                     encoding="utf-8")
    _write_snapshot(args, "analyze", extra={"method": method.value})
    print(f"analyzed {len(rows)} recordings -> {out / REPORT_FILE}")
    return EXIT_OK


def _relevance_index(rel_dir, method, class_index):
    if not rel_dir.is_dir():
        raise CliError(f"relevance directory {rel_dir} not found", EXIT_LOAD)
    code = method.short_code
    index = {}
    for p in sorted(rel_dir.iterdir()):
        name = p.name
        for suffix in (".txt", ".txt.gz"):
            if not name.endswith(suffix):
                continue
            stem = name[: -len(suffix)]
            parts = stem.rsplit(".", 2)
            if len(parts) == 3 and parts[1] == code and (
                    class_index is None or parts[2] == f"c{class_index}"):
                index[parts[0]] = p
    return index


# ---- render -------------------------------------------------------------------------

def cmd_render(args):
    kinds = args.figure or []
    for k in kinds:
        if k not in render.FIGURE_KINDS:
            raise CliError(f"unknown figure kind {k!r}; choose from "
                           f"{', '.join(render.FIGURE_KINDS)}", EXIT_USAGE)
    analysis = None
    if args.analysis:
        try:
            analysis = json.loads(Path(args.analysis).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read analysis file: {exc}", EXIT_LOAD)
    if not kinds:
        kinds = [k for k in render.FIGURE_KINDS if k != "trace-heatmap"] if analysis else []
        if args.manifest and args.relevance:
            kinds = ["trace-heatmap"] + kinds
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in kinds:
        try:
            if kind == "trace-heatmap":
                written += _render_heatmaps(args, out)
                continue
            if analysis is None:
                raise CliError(f"figure {kind} needs --analysis", EXIT_USAGE)
            target = analysis["target"]
            if kind == "class-histogram":
                h = analysis["histogram"]
                svg = render.class_histogram_figure(h["edges"], h["counts"],
                                                    title=f"Relevance distribution ({target})")
            elif kind == "recording-boxplots":
                svg = render.recording_boxplots_figure(
                    analysis["recordings"], title=f"Relevance per recording ({target})")
            elif kind == "lead-boxplots":
                svg = render.lead_boxplots_figure(
                    analysis["lead_boxplots"], title=f"Mean relevance per lead ({target})")
            else:
                panels = [{"label": lab, "beat": b["beat_normalized"],
                           "relevance": b["relevance_normalized"],
                           "variance": b["relevance_variance"]}
                          for lab, b in sorted(analysis["beats"].items())]
                lead = next(iter(analysis["beats"].values()))["lead"] if panels else ""
                svg = render.beat_average_figure(
                    panels, title=f"Average beats, lead {lead} ({target})", factor=args.upsample)
        except CliError:
            raise
        except (KeyError, TypeError, ValueError, render.RenderError) as exc:
            raise CliError(f"cannot render {kind}: {exc}", EXIT_RENDER)
        path = out / f"{kind}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    if not written:
        raise CliError("nothing to render: give --analysis and/or --manifest with "
                       "--relevance", EXIT_USAGE)
    _write_snapshot(args, "render", extra={"figures": kinds, "upsample": args.upsample,
                                           "per_lead": not args.global_norm})
    print(f"wrote {len(written)} figures to {out}")
    return EXIT_OK


def _render_heatmaps(args, out):
    if not (args.manifest and args.relevance):
        raise CliError("trace-heatmap needs --manifest and --relevance", EXIT_USAGE)
    manifest = _load_manifest(args.manifest)
    method = Method.parse(args.method[0] if args.method else "IG")
    index = _relevance_index(Path(args.relevance), method, args.class_index)
    entries = list(manifest)
    if args.id:
        wanted = set(args.id)
        entries = [e for e in entries if e.id in wanted]
        missing = wanted - {e.id for e in entries}
        if missing:
            raise CliError(f"ids not in manifest: {sorted(missing)}", EXIT_USAGE)
    else:
        # first recording of each label
        seen, first = set(), []
        for e in entries:
            if e.label not in seen:
                seen.add(e.label)
                first.append(e)
        entries = first
    written = []
    for e in entries:
        try:
            rec = io.read_recording(e.path)
            path = index.get(e.id)
            if path is None:
                raise CliError(f"missing relevance file for {e.id}", EXIT_LOAD)
            tensor = io.read_relevance(path, expected_shape=rec.samples.shape)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load inputs for {e.id}: {exc}", EXIT_LOAD)
        try:
            svg = render.trace_heatmap(rec.samples, tensor.values,
                                       title=f"{e.id} ({e.label}) {method.short_code}",
                                       per_lead=not args.global_norm, factor=args.upsample)
        except render.RenderError as exc:
            raise CliError(f"cannot render heatmap for {e.id}: {exc}", EXIT_RENDER)
        p = out / f"trace-heatmap.{e.id}.{method.short_code}.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written


# ---- helpers: synthetic data and fixture models ---------------------------------------

MODE_OF_LABEL = {"Normal": "normal", "AF": "af", "LBBB": "lbbb"}


def synth_dataset(out_dir, n_per_class=200, seed=0, labels=("Normal", "AF", "LBBB"),
                  noise=0.02):
    """Write ``n_per_class`` synthetic recordings per label plus ``manifest.csv``.

    Heart rate and R amplitude vary per recording; every choice derives
    from ``seed``.
    """
    out = Path(out_dir)
    rec_dir = out / "recordings"
    entries = []
    for li, label in enumerate(labels):
        mode = MODE_OF_LABEL[label]
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, li, i])
            hr = rng.uniform(55, 95)
            waves = SynthConfig().waves
            scale = rng.uniform(0.8, 1.2)
            waves = {k: (a * scale, w, o) for k, (a, w, o) in waves.items()}
            cfg = SynthConfig(heart_rate=hr, waves=waves, noise=noise, mode=mode,
                              rr_jitter=0.25, seed=int(rng.integers(2 ** 31)), n_samples=4096)
            rid = f"{label.lower()}-{i:04d}"
            rec, _ = synth_ecg(cfg, id=rid)
            path = io.write_recording(rec, rec_dir / f"{rid}.csv")
            entries.append((rid, path, label))
    manifest = io.write_manifest(entries, out / "manifest.csv")
    return manifest


def cmd_synth(args):
    labels = [lab.strip() for lab in args.labels.split(",") if lab.strip()]
    for lab in labels:
        if lab not in MODE_OF_LABEL:
            raise CliError(f"unknown label {lab!r}", EXIT_USAGE)
    path = synth_dataset(args.out, args.n, args.seed, labels, args.noise)
    print(f"wrote {args.n * len(labels)} recordings; manifest {path}")
    return EXIT_OK


MODEL_KINDS = {
    "resnet_mini": lambda seed: fixtures.resnet_mini(seed),
    "p_wave": lambda seed: fixtures.p_wave_detector(),
    "tiny_linear": lambda seed: fixtures.tiny_linear(),
}


def cmd_make_model(args):
    model = MODEL_KINDS[args.kind](args.seed)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    print(f"wrote {model.name} ({len(model.layers)} layers) to {path}")
    return EXIT_OK


# ---- parser -------------------------------------------------------------------------

def _common(p, manifest=True, model=True):
    if manifest:
        p.add_argument("--manifest", required=True, help="dataset manifest (id,path,label)")
    if model:
        p.add_argument("--model", required=True, help="model file")
    p.add_argument("--out", required=True, help="output directory")


def _class_args(p):
    p.add_argument("--class", dest="target", type=str.lower, choices=("af", "lbbb"),
                   default=None, help="interrogated class (default af)")
    p.add_argument("--class-index", type=int, default=None,
                   help="model output index, overriding the name lookup")


def _threshold_args(p):
    p.add_argument("--threshold-af", type=float, default=DEFAULT_THRESHOLDS["AF"])
    p.add_argument("--threshold-lbbb", type=float, default=DEFAULT_THRESHOLDS["LBBB"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relattr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relattr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="score recordings and apply class thresholds")
    _common(p)
    _class_args(p)
    _threshold_args(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("attribute", help="write relevance files per recording and method")
    _common(p)
    _class_args(p)
    p.add_argument("--method", action="append",
                   help="IG, LRP-epsilon, LRP-alphabeta, LRP-wsquare, LRP-composite "
                        "(repeatable; default IG)")
    p.add_argument("--ig-steps", type=int, default=64)
    p.add_argument("--epsilon", type=float, default=1e-7)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--output-mode", choices=("linear", "sigmoid"), default="linear")
    p.add_argument("--compress", action="store_true", help="gzip relevance files")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("analyze", help="aggregate relevance into the analysis report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--relevance", required=True, help="directory of relevance files")
    p.add_argument("--model", help="model used to score recordings")
    p.add_argument("--classification", help="classification.csv instead of --model")
    p.add_argument("--out", required=True)
    _class_args(p)
    _threshold_args(p)
    p.add_argument("--method", action="append", help="method to analyze (default IG)")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--lead", default="II", help="lead for the beat average")
    p.add_argument("--detection-lead", default="II", help="lead for R-peak detection")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("render", help="write SVG figures")
    p.add_argument("--figure", action="append", help=", ".join(render.FIGURE_KINDS))
    p.add_argument("--analysis", help="analysis.json from analyze")
    p.add_argument("--manifest", help="manifest for trace heatmaps")
    p.add_argument("--relevance", help="relevance directory for trace heatmaps")
    p.add_argument("--method", action="append", help="method for trace heatmaps")
    p.add_argument("--class-index", type=int, default=None)
    p.add_argument("--id", action="append", help="recording id for a trace heatmap")
    p.add_argument("--upsample", type=int, default=render.DEFAULT_UPSAMPLE)
    p.add_argument("--global-norm", action="store_true",
                   help="normalize by the global instead of per-lead maximum")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="write a synthetic labelled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200, help="recordings per label")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels", default="Normal,AF,LBBB")
    p.add_argument("--noise", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("make-model", help="write a fixture model file")
    p.add_argument("--kind", choices=sorted(MODEL_KINDS), default="resnet_mini")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(func=cmd_make_model)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"relattr: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
