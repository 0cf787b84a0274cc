"""Command-line entry point.

Subcommands: gen (synthetic dataset), train, eval, saliency. All outputs
are data files (CSV, JSONL, RBNN, FITS, PGM); plotting is left to
external tooling. Option precedence: built-in defaults < config file
(key=value lines) < command-line flags. RB_THREADS caps the worker
count (the current implementation runs everything on one worker).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

import argparse
import os
import sys
from pathlib import Path

from realbogus import data_io, fitsio, metrics, preprocess, saliency, synth, train as training
from realbogus.errors import (
    ConfigurationError,
    DataError,
    NumericError,
    RealBogusError,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def read_config_file(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def worker_cap():
    raw = os.environ.get("RB_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"RB_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise ConfigurationError(f"RB_THREADS must be >= 1, got {cap}")
    return cap


def build_parser():
    parser = argparse.ArgumentParser(
        prog="realbogus",
        description="Real/bogus transient classification pipeline")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--real-fraction", type=float, default=0.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--variant", choices=["dia", "nodia"], default="dia",
                     help="dia writes diff stamps too; nodia only srch/tmpl")
    gen.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="train a model on a manifest")
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--variant", choices=["dia", "nodia"], default="dia")
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--lr", type=float, default=0.01)
    tr.add_argument("--batch", type=int, default=128)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--split-fraction", type=float, default=0.8)
    tr.add_argument("--checkpoint-interval", type=int, default=0)
    tr.add_argument("--resume", default=None, metavar="CHECKPOINT",
                    help="continue from a checkpoint-epochNNNNN.rbnn file")
    tr.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="evaluate a trained model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--out", required=True)

    sal = sub.add_parser("saliency", help="saliency importance analysis")
    sal.add_argument("--model", required=True)
    sal.add_argument("--manifest", required=True)
    sal.add_argument("--pgm", action="store_true",
                     help="also write per-example saliency maps as PGM")
    sal.add_argument("--out", required=True)
    return parser


def apply_config_file(args, values):
    mapping = {
        "variant": str, "epochs": int, "lr": float, "batch": int,
        "seed": int, "n": int, "real_fraction": float,
        "split_fraction": float, "checkpoint_interval": int,
        "manifest": str, "model": str, "out": str,
    }
    parser_defaults = build_parser()
    for key, raw in values.items():
        attr = key.replace("-", "_")
        if attr not in mapping:
            raise ConfigurationError(f"unknown config key {key!r}")
        if hasattr(args, attr) and getattr(args, attr) == _default_for(parser_defaults, args.command, attr):
            setattr(args, attr, mapping[attr](raw))
    return args


def _default_for(parser, command, attr):
    for action in parser._subparsers._group_actions[0].choices[command]._actions:
        if action.dest == attr:
            return action.default
    return object()


def _manifest_composites(manifest_path, variant):
    rows = data_io.load_manifest(manifest_path)
    sets = data_io.load_dia_sets(rows, base_dir=Path(manifest_path).parent)
    return [preprocess.preprocess_dia_set(s, variant) for s in sets]


def _variant_of_model(network):
    return "dia" if network.input_shape[1] == 153 else "nodia"


def _checkpoint_epoch(path):
    stem = Path(path).stem
    marker = "epoch"
    pos = stem.rfind(marker)
    digits = stem[pos + len(marker):] if pos >= 0 else ""
    if not digits.isdigit():
        raise ConfigurationError(
            f"cannot infer epoch from checkpoint name {path!r}; "
            "expected checkpoint-epochNNNNN.rbnn")
    return int(digits)


def cmd_gen(args):
    if args.n <= 0:
        raise ConfigurationError(f"--n must be > 0, got {args.n}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = synth.SceneConfig(seed=args.seed)
    sets = synth.generate_dataset(args.n, args.real_fraction, config, args.seed)
    rows = []
    for s in sets:
        paths = {}
        roles = ("tmpl", "srch", "diff") if args.variant == "dia" else ("tmpl", "srch")
        for role in roles:
            name = f"{s.id}_{role}.fits"
            fitsio.write_fits_file(getattr(s, role), out / name)
            paths[role] = name
        rows.append(data_io.ManifestRow(
            id=s.id, label=s.label, tmpl=paths["tmpl"], srch=paths["srch"],
            diff=paths.get("diff", ""), split=""))
    data_io.save_manifest(rows, out / "manifest.csv")
    print(f"wrote {len(rows)} DIA-sets to {out}")
    return 0


def cmd_train(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    composites = _manifest_composites(args.manifest, args.variant)
    train_set, val_set = training.split_dataset(
        composites, fraction=args.split_fraction, seed=args.seed)
    epochs = args.epochs or training.DEFAULT_EPOCHS[args.variant]
    # float32 matches the checkpoint precision (so resumed runs are
    # bitwise identical) and is several times faster on this workload
    config = training.TrainConfig(
        epochs=epochs, learning_rate=args.lr, batch_size=args.batch,
        seed=args.seed, checkpoint_interval=args.checkpoint_interval,
        checkpoint_dir=str(out), dtype="float32")
    from realbogus.nn.network import build_architecture
    start_epoch, history = 1, []
    if args.resume:
        network = data_io.load_model(args.resume)
        start_epoch = _checkpoint_epoch(args.resume) + 1
        sidecar = Path(args.resume).parent / "history.jsonl"
        if sidecar.exists():
            history = [r for r in training.read_history(sidecar)
                       if r.epoch < start_epoch]
    else:
        network = build_architecture(args.variant, seed=args.seed)
    network, history = training.train(network, train_set, val_set, config,
                                      start_epoch=start_epoch, history=history)
    for rec in history:
        print(f"epoch {rec.epoch:4d}  loss {rec.train_loss:.4f}  "
              f"acc {rec.train_acc:.4f}  val_loss {rec.val_loss:.4f}  "
              f"val_acc {rec.val_acc:.4f}")
    data_io.save_model(network, out / "model.rbnn")
    training.write_history(history, out / "history.jsonl")
    print(f"final train acc {history[-1].train_acc:.4f}, "
          f"val acc {history[-1].val_acc:.4f}")
    return 0


def cmd_eval(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    network = data_io.load_model(args.model)
    composites = _manifest_composites(args.manifest, _variant_of_model(network))
    accuracy, loss, scores, preds, labels = training.evaluate(network, composites)
    cm = metrics.confusion(labels, preds)
    curve = metrics.roc_auc(labels, scores)
    metrics.write_confusion_csv(cm, out / "confusion.csv")
    metrics.write_roc_csv(curve, out / "roc.csv")
    with open(out / "summary.csv", "w") as fh:
        fh.write("accuracy,auc,loss,n\n")
        fh.write(f"{accuracy},{curve.auc},{loss},{len(composites)}\n")
    print(f"accuracy {accuracy:.4f}  auc {curve.auc:.4f}  n {len(composites)}")
    return 0


def cmd_saliency(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    network = data_io.load_model(args.model)
    composites = _manifest_composites(args.manifest, _variant_of_model(network))
    rows = saliency.analyze_examples(network, composites)
    summary = saliency.quadrant_summary(rows, composites[0].layout)
    saliency.write_importance_csv(rows, out / "importance.csv")
    saliency.write_quadrant_csv(summary, out / "quadrants.csv")
    saliency.write_histogram_csv(summary, out / "histograms.csv")
    if args.pgm:
        for comp in composites:
            smap = saliency.saliency_map(network, comp)
            saliency.write_pgm(smap, out / f"{comp.id}_saliency.pgm")
    if summary.empty_quadrants:
        print(f"note: empty quadrants {summary.empty_quadrants}")
    print(f"analyzed {len(rows)} examples")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "saliency": cmd_saliency,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        worker_cap()
        if args.config:
            apply_config_file(args, read_config_file(args.config))
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
