"""Command line interface.

Subcommands: ``synth-gen``, ``train``, ``eval``, ``props``, ``encode``,
``bench``. Every subcommand accepts ``--config FILE``: a flat ``key = value``
file whose keys are the long flag names (``n-mu`` or ``n_mu``); explicit
flags win over the file and relative paths in it resolve against the file's
directory.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
3 property-suite failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as fio
from .bench import DEFAULT_DATASETS, DEFAULT_ENCODERS, run_bench
from .encoders import FAMILIES, PositionEncoder, canonical_family
from .estimator import ENCODER_PARAMS
from .metrics import EvalReport, delta_report, evaluate
from .optim import TrainingError
from .props import run_all
from .synth import MvMFSpec, PRESETS, generate
from .training import Checkpoint, train

log = logging.getLogger("sphloc")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_PROPS = 0, 1, 2, 3
PATH_KEYS = {"out", "dataset", "checkpoint", "metrics", "img_scores", "baseline", "anchors_from"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text):
    return [int(t) for t in _csv_list(text)]


def _add_encoder_flags(p, default_family="sphereM_plus"):
    p.add_argument("--encoder", default=default_family,
                   help=f"encoder family: {', '.join(FAMILIES)}")
    p.add_argument("--s", dest="n_scales", type=int, default=32, help="number of scales S")
    p.add_argument("--r-min", type=float, default=1e-2)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--n-anchors", type=int, default=200, help="rbf anchor count M")
    p.add_argument("--sigma", type=float, default=1.0, help="rbf kernel width")
    p.add_argument("--rbf-metric", choices=("chord", "lonlat"), default="chord")
    p.add_argument("--n-features", type=int, default=256, help="rff output dimension D")
    p.add_argument("--bandwidth", type=float, default=1.0, help="rff kernel bandwidth")
    p.add_argument("--n-lon", type=int, default=36, help="tile cells along longitude")
    p.add_argument("--n-lat", type=int, default=18, help="tile cells along latitude")


def _add_train_flags(p):
    p.add_argument("--network", choices=("ffn", "residual"), default="ffn")
    p.add_argument("--hidden-layers", type=int, default=1, help="h")
    p.add_argument("--hidden-dim", type=int, default=256, help="k")
    p.add_argument("--embed-dim", type=int, default=None, help="d (defaults to k)")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--beta", type=float, default=None, help="positive weight (default: class count)")
    p.add_argument("--negatives", dest="n_negatives", type=int, default=1)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="sphloc", description=__doc__.split("\n\n")[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-gen", help="generate a vMF mixture dataset")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--placement", choices=("uniform", "stratified"), default=None)
    p.add_argument("--classes", type=int, default=None, help="number of classes C")
    p.add_argument("--n-mu", type=int, default=None, help="latitude bands (stratified)")
    p.add_argument("--c-mu", type=int, default=None, help="centers per band (stratified)")
    p.add_argument("--sp", type=int, default=100, help="samples per class")
    p.add_argument("--kappa-min", type=float, default=None)
    p.add_argument("--kappa-max", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV path (provenance JSON alongside)")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("train", help="train a location classifier")
    p.add_argument("--config")
    p.add_argument("--dataset", required=True)
    p.add_argument("--degrees", action="store_true", help="dataset coordinates are degrees")
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--metrics", default=None, help="metric history CSV (default: <out>.metrics.csv)")
    _add_encoder_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--degrees", action="store_true")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--img-scores", default=None, help="CSV point_id,score_0,...")
    p.add_argument("--baseline", default=None, help="report JSON to compute delta MRR against")
    p.add_argument("--band-deg", type=float, default=10.0)
    p.add_argument("--cell-deg", type=float, default=15.0)
    p.add_argument("--out", required=True, help="report JSON path; CSV tables alongside")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("props", help="run the encoder property checks")
    p.add_argument("--config")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report JSON path (default: stdout only)")
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("encode", help="export encodings over a lon/lat grid")
    p.add_argument("--config")
    p.add_argument("--checkpoint", default=None, help="export NN(PE(x)) embeddings of this model")
    p.add_argument("--anchors-from", default=None, help="dataset CSV to draw rbf anchors from")
    p.add_argument("--grid-lon", type=int, default=72, help="grid columns")
    p.add_argument("--grid-lat", type=int, default=36, help="grid rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("bench", help="compare encoders on synthetic presets")
    p.add_argument("--config")
    p.add_argument("--datasets", type=_csv_list, default=list(DEFAULT_DATASETS))
    p.add_argument("--encoders", type=_csv_list, default=list(DEFAULT_ENCODERS))
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    p.add_argument("--model", default="sphereM_plus", help="encoder compared against the best baseline")
    p.add_argument("--s", dest="n_scales", type=int, default=32)
    p.add_argument("--r-min", type=float, default=1e-2)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--hidden-layers", type=int, default=1)
    p.add_argument("--hidden-dim", type=int, default=256)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_bench)
    return parser


# config files

def _dest_map(subparser):
    m = {}
    for a in subparser._actions:
        if a.dest in ("help", "config"):
            continue
        for opt in a.option_strings:
            if opt.startswith("--"):
                m[opt[2:].replace("-", "_")] = a
        m[a.dest] = a
    return m


def _apply_config(subparser, path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string("[run]\n" + path.read_text())
    actions = _dest_map(subparser)
    defaults = {}
    for key, raw in cp["run"].items():
        norm = key.replace("-", "_")
        action = actions.get(norm)
        if action is None:
            raise UsageError(f"{path}: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            value = cp["run"].getboolean(key)
        else:
            value = action.type(raw) if action.type else raw
        if action.dest in PATH_KEYS:
            value = str((path.parent / value).resolve())
        defaults[action.dest] = value
        action.required = False
    subparser.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    # find the subcommand and its --config before the real parse
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    cmd = next((a for a in argv if a in parser._subparsers._group_actions[0].choices), None)
    if cmd is not None:
        known, _ = pre.parse_known_args(argv[argv.index(cmd) + 1 :])
        if known.config:
            _apply_config(parser._subparsers._group_actions[0].choices[cmd], known.config)
    return parser.parse_args(argv)


def _flags(args):
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


# commands

def cmd_synth_gen(args):
    kw = {}
    if args.preset:
        kw.update(PRESETS[args.preset])
    if args.placement:
        kw["placement"] = args.placement
    placement = kw.get("placement", "uniform")
    n_bands = args.n_mu if args.n_mu is not None else kw.get("n_bands")
    per_band = args.c_mu if args.c_mu is not None else kw.get("per_band")
    if placement == "stratified":
        if n_bands is None or per_band is None:
            raise UsageError("stratified placement needs --n-mu and --c-mu")
        classes = args.classes if args.classes is not None else n_bands * per_band
        if classes != n_bands * per_band:
            raise UsageError(f"--classes {classes} != --n-mu {n_bands} x --c-mu {per_band}")
    else:
        if args.n_mu is not None or args.c_mu is not None:
            raise UsageError("--n-mu/--c-mu only apply to stratified placement")
        classes = args.classes if args.classes is not None else 50
        n_bands = per_band = None
    try:
        spec = MvMFSpec(
            n_classes=classes,
            samples_per_class=args.sp,
            kappa_min=args.kappa_min if args.kappa_min is not None else 1.0,
            kappa_max=args.kappa_max if args.kappa_max is not None else kw.get("kappa_max", 16.0),
            placement=placement,
            n_bands=n_bands,
            per_band=per_band,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = generate(spec)
    fio.write_dataset(ds, args.out, _flags(args))
    k = ds.kappas
    print(f"wrote {len(ds.labels)} points, {ds.n_classes} classes to {args.out}")
    print(f"kappa min {k.min():.3f} median {np.median(k):.3f} max {k.max():.3f}")
    print("class,kappa,lon_deg,lat_deg")
    for c, (kc, (lon, lat)) in enumerate(zip(k, ds.centers)):
        print(f"{c},{kc:.3f},{math.degrees(lon):.2f},{math.degrees(lat):.2f}")
    return EXIT_OK


def _load_dataset(path, degrees):
    if not Path(path).is_file():
        raise UsageError(f"dataset not found: {path}")
    return fio.read_dataset(path, degrees=degrees)


def _model_kwargs(args):
    kw = {k: getattr(args, k) for k in ENCODER_PARAMS}
    kw.update(
        encoder=canonical_family(args.encoder),
        network=args.network,
        hidden_layers=args.hidden_layers,
        hidden_dim=args.hidden_dim,
        embed_dim=args.embed_dim,
        dropout=args.dropout,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        optimizer=args.optimizer,
        beta=args.beta,
        n_negatives=args.n_negatives,
        eval_every=args.eval_every,
        random_state=args.seed,
    )
    return kw


def cmd_train(args):
    ds = _load_dataset(args.dataset, args.degrees)
    try:
        kw = _model_kwargs(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    flags = _flags(args)
    try:
        ckpt = train(ds, metadata={"dataset": str(args.dataset), "flags": flags}, **kw)
    except TrainingError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    metrics_path = args.metrics or str(Path(args.out).with_suffix(".metrics.csv"))
    ckpt_text = json.dumps(ckpt.to_dict())
    hist_text = fio.table_csv(ckpt.history, ["epoch", "train_loss", "val_top1"],
                              fmt="sphloc-metrics/1", flags=flags)
    fio.atomic_write(args.out, ckpt_text)
    fio.atomic_write(metrics_path, hist_text)
    print(f"best epoch {ckpt.epoch} val top1 {ckpt.val_top1}")
    print(f"wrote {args.out} and {metrics_path}")
    return EXIT_OK


def cmd_eval(args):
    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    ckpt = Checkpoint.load(args.checkpoint)
    ds = _load_dataset(args.dataset, args.degrees)
    n_classes = ckpt.model.net_.n_classes
    if ds.n_classes != n_classes:
        raise UsageError(f"checkpoint has {n_classes} classes, dataset has {ds.n_classes}")
    X, y, ids = ds.split(args.split)
    if len(y) == 0:
        raise UsageError(f"split {args.split!r} is empty")
    img = None
    if args.img_scores:
        try:
            img = fio.read_img_scores(args.img_scores, ids, n_classes)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    edges = np.radians(np.arange(-90.0, 90.0 + args.band_deg / 2, args.band_deg))
    edges[-1] = math.pi / 2
    flags = _flags(args)
    report = evaluate(
        ckpt.model, X, y, img_scores=img, band_edges=edges, cell_deg=args.cell_deg,
        metadata={"checkpoint": str(args.checkpoint), "dataset": str(args.dataset),
                  "split": args.split, "flags": flags},
    )
    out = Path(args.out)
    doc = {"format": "sphloc-eval/1", **report.to_dict()}
    outputs = {
        out: json.dumps(doc, indent=1) + "\n",
        out.with_suffix(".bands.csv"): fio.table_csv(report.bands, fmt="sphloc-bands/1", flags=flags),
        out.with_suffix(".cells.csv"): fio.table_csv(
            report.cells, ["lon_lo", "lon_hi", "lat_lo", "lat_hi", "n", "mrr"],
            fmt="sphloc-cells/1", flags=flags),
    }
    if args.baseline:
        base = EvalReport.from_dict(json.loads(Path(args.baseline).read_text()))
        delta = delta_report(report, base)
        outputs[out.with_suffix(".delta_bands.csv")] = fio.table_csv(
            delta["bands"], ["lat_lo", "lat_hi", "n", "delta_mrr"], fmt="sphloc-delta/1", flags=flags)
        outputs[out.with_suffix(".delta_cells.csv")] = fio.table_csv(
            delta["cells"], ["lon_lo", "lon_hi", "lat_lo", "lat_hi", "n", "delta_mrr"],
            fmt="sphloc-delta/1", flags=flags)
        print(f"delta MRR vs baseline {delta['delta_mrr']:+.4f}")
    for path, text in outputs.items():
        fio.atomic_write(path, text)
    print(" ".join(f"top{k} {v:.4f}" for k, v in report.top_k.items()) + f" mrr {report.mrr:.4f}")
    return EXIT_OK


def cmd_props(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    report = run_all(n=args.trials, seed=args.seed)
    text = json.dumps(report, indent=1) + "\n"
    if args.out:
        fio.atomic_write(args.out, text)
    print(text, end="")
    return EXIT_OK if report["passed"] else EXIT_PROPS


def cmd_encode(args):
    if args.grid_lon < 1 or args.grid_lat < 1:
        raise UsageError("grid resolution must be positive")
    lon = -math.pi + (np.arange(args.grid_lon) + 0.5) * 2 * math.pi / args.grid_lon
    lat = -math.pi / 2 + (np.arange(args.grid_lat) + 0.5) * math.pi / args.grid_lat
    LAT, LON = np.meshgrid(lat, lon, indexing="ij")
    pts = np.stack([LON.ravel(), LAT.ravel()], axis=1)
    if args.checkpoint:
        feats = Checkpoint.load(args.checkpoint).model.embed(pts)
    else:
        kw = {k: getattr(args, k) for k in ENCODER_PARAMS}
        try:
            enc = PositionEncoder(family=canonical_family(args.encoder), random_state=args.seed, **kw)
            fit_X = None
            if enc.family == "rbf" or canonical_family(args.encoder) == "rbf":
                if not args.anchors_from:
                    raise UsageError("rbf needs --anchors-from DATASET")
                fit_X = _load_dataset(args.anchors_from, False).split("train")[0]
            enc.fit(fit_X)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        feats = enc.transform(pts)
    cols = ["lon_rad", "lat_rad"] + [f"f_{i}" for i in range(feats.shape[1])]
    rows = [dict(zip(cols, [p[0], p[1], *f])) for p, f in zip(pts, feats)]
    fio.atomic_write(args.out, fio.table_csv(rows, cols, fmt="sphloc-encoding/1", flags=_flags(args)))
    print(f"wrote {len(rows)} rows x {feats.shape[1]} features to {args.out}")
    return EXIT_OK


def cmd_bench(args):
    for name in args.datasets:
        if name not in PRESETS:
            raise UsageError(f"unknown dataset preset {name!r}; choose from {sorted(PRESETS)}")

    def progress(ds, enc, seed, top1):
        log.info("%s %s seed=%s top1=%s", ds, enc, seed, top1)

    rows = run_bench(
        args.datasets, args.encoders, args.seeds, model=args.model, progress=progress,
        n_scales=args.n_scales, r_min=args.r_min, r_max=args.r_max,
        hidden_layers=args.hidden_layers, hidden_dim=args.hidden_dim,
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
    )
    cols = ["dataset", "encoder", "n_ok", "n_failed", "mean_top1", "std_top1", "seeds",
            "best_baseline", "delta_top1", "er"]
    fio.atomic_write(args.out, fio.table_csv(rows, cols, fmt="sphloc-bench/1", flags=_flags(args)))
    for r in rows:
        m = "-" if r["mean_top1"] is None else f"{r['mean_top1']:.4f} +- {r['std_top1']:.4f}"
        extra = "" if r["er"] is None else f"  dTop1 {r['delta_top1']:+.4f} ER {r['er']:+.3f}"
        print(f"{r['dataset']:6s} {r['encoder']:14s} {m}{extra}")
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"sphloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits on --help (0) and on usage errors (1)
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sphloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"sphloc {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"sphloc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
