"""``chainvit`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

Every optional flag can also be set in a ``--config`` file of ``key = value``
lines (``#`` starts a comment; keys use the flag name with or without
dashes). Flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .container import ContainerError
from .dataset import CLASS_NAMES, DatasetError, LabeledDataset, load_csv, split, synth_generate, write_csv
from .disasm import BytecodeParseError, disassemble
from .imager import ImageSpec, save_images
from .ingest import RpcClient, RpcEndpoint, RpcError, watch
from .metrics import confusion, format_report, scores
from .pipeline import Bundle, BundleError, Detector, fit_encoder
from .training import TrainConfig, TrainingDiverged, train
from .vit import VitConfig, VitModel

log = logging.getLogger("chainvit")


class UsageError(Exception):
    pass


_INPUT_ERRORS = (
    UsageError,
    FileNotFoundError,
    IsADirectoryError,
    BytecodeParseError,
    DatasetError,
    ContainerError,
    BundleError,
)


def read_config(path: str) -> dict[str, str]:
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-").replace("-", "_")] = value
    return cfg


def _load_records(path: str, what: str) -> LabeledDataset:
    ds = load_csv(path)
    for err in ds.errors:
        print(f"{path}:{err.line}: skipped row: {err.message}", file=sys.stderr)
    if len(ds) == 0:
        raise UsageError(f"{path}: no samples in {what} data")
    return ds


def _require_labels(ds: LabeledDataset, path: str) -> np.ndarray:
    if any(lbl is None for lbl in ds.labels):
        raise UsageError(f"{path}: every row needs a label")
    return np.array(ds.labels, dtype=np.int64)


# --- subcommands ----------------------------------------------------------


def cmd_disasm(args) -> int:
    text = sys.stdin.read() if args.source == "-" else Path(args.source).read_text()
    seq = disassemble("".join(text.split()))
    out = _open_out(args.out)
    for tok in seq.tokens:
        out.write(tok + "\n")
    if seq.truncated:
        print("warning: trailing PUSH immediate truncated", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    if args.out is None:
        raise UsageError("synth needs --out")
    ds = synth_generate(args.per_class, args.seed)
    out = Path(args.out)
    write_csv(ds, out)
    print(f"wrote {len(ds)} records to {out}")
    if args.test_fraction is not None:
        train_ds, test_ds = split(ds, args.test_fraction, args.seed)
        for tag, part in (("train", train_ds), ("test", test_ds)):
            p = out.with_name(f"{out.stem}.{tag}{out.suffix}")
            write_csv(part, p)
            print(f"wrote {len(part)} {tag} records to {p}")
    return 0


def cmd_fit(args) -> int:
    if args.out is None:
        raise UsageError("fit needs --out BUNDLE_DIR")
    ds = _load_records(args.train_csv, "training")
    enc = fit_encoder(ds.records, ImageSpec(args.height, args.width))
    Bundle(Path(args.out), enc).save()
    print(f"d_op={enc.tfidf.d_op} corpus={enc.tfidf.corpus_size} image={args.height}x{args.width}")
    return 0


def cmd_encode(args) -> int:
    if args.out is None:
        raise UsageError("encode needs --out IMAGES_FILE")
    bundle = Bundle.load(args.bundle)
    ds = _load_records(args.csv, "input")
    labels = ds.labels
    images = bundle.encoder.encode_many(ds.records)
    save_images(args.out, images, None if any(lbl is None for lbl in labels) else labels)
    print(f"wrote {len(images)} images of {images.shape[1]}x{images.shape[2]} to {args.out}")
    return 0


def cmd_train(args) -> int:
    bundle = Bundle.load(args.bundle)
    ds = _load_records(args.train_csv, "training")
    labels = _require_labels(ds, args.train_csv)
    spec = bundle.encoder.spec
    config = VitConfig(
        dim=args.dim, depth=args.depth, heads=args.heads, height=spec.height,
        width=spec.width, num_classes=len(CLASS_NAMES), seed=args.seed,
    )  # fmt: skip
    hyper = TrainConfig(
        lr=args.lr, batch_size=args.batch_size, epochs=args.epochs, optimizer=args.optimizer,
        seed=args.seed, stop_at_accuracy=args.stop_at_accuracy,
    )  # fmt: skip
    images = bundle.encoder.encode_many(ds.records)
    model = VitModel(config)
    if args.float64:
        model.double()
    log_path = Path(args.out) if args.out else bundle.root / "train_log.csv"
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss", "accuracy", "seconds"])

        def on_epoch(s):
            writer.writerow([s.epoch, f"{s.loss:.6f}", f"{s.accuracy:.6f}", f"{s.seconds:.2f}"])
            fh.flush()
            print(f"epoch {s.epoch:3d}  loss {s.loss:.4f}  acc {100 * s.accuracy:.2f}%")

        ckpt = train(model, images, labels, hyper, bundle.checkpoint_path, on_epoch=on_epoch)
    print(f"checkpoint: {bundle.checkpoint_path} (epoch {ckpt.epoch}); log: {log_path}")
    return 0


def cmd_eval(args) -> int:
    bundle = Bundle.load(args.bundle, require_model=True)
    ds = _load_records(args.test_csv, "test")
    labels = _require_labels(ds, args.test_csv)
    preds = [p.class_id for p in Detector.from_bundle(bundle).classify(ds.records)]
    cm = confusion(preds, labels, CLASS_NAMES)
    s = scores(cm)
    print(format_report(s, CLASS_NAMES))
    print()
    if args.out:
        Path(args.out).write_text(cm.to_csv())
        print(f"confusion matrix written to {args.out}")
    else:
        print(cm.to_csv(), end="")
    return 0


def cmd_infer(args) -> int:
    bundle = Bundle.load(args.bundle, require_model=True)
    ds = _load_records(args.csv, "input")
    out = _open_out(args.out)
    for rec, pred in zip(ds.records, Detector.from_bundle(bundle).classify(ds.records)):
        line = {"tx_id": rec.tx_id, "class_id": pred.class_id, "class_name": pred.class_name,
                "logits": pred.logits}  # fmt: skip
        out.write(json.dumps(line) + "\n")
    return 0


def cmd_watch(args) -> int:
    bundle = Bundle.load(args.bundle, require_model=True)
    detector = Detector.from_bundle(bundle)
    try:
        endpoint = RpcEndpoint.from_env(
            args.rpc_url, timeout=args.timeout, poll_interval=args.interval,
            auth_token=args.auth_token,
        )  # fmt: skip
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sink = _open_out(args.out, append=True)
    with RpcClient(endpoint) as client:
        try:
            watch(client, detector, sink, max_polls=args.max_polls)
        except KeyboardInterrupt:
            pass
    return 0


def _open_out(path: str | None, append: bool = False):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "a" if append else "w")


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="single source of randomness")
    common.add_argument("--config", help="key = value file mirroring the flags")
    common.add_argument("--out", help="output path (meaning depends on subcommand)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chainvit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disasm", parents=[common], help="print one mnemonic per line")
    p.add_argument("source", help="file of hex bytecode, or - for stdin")
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic 7-class corpus")
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--test-fraction", type=float, default=None,
                   help="also write stratified <out>.train.csv / <out>.test.csv")  # fmt: skip
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit TF-IDF + scaler into a bundle dir")
    p.add_argument("train_csv")
    p.add_argument("--height", type=int, default=24)
    p.add_argument("--width", type=int, default=24)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("encode", parents=[common], help="write an image batch file")
    p.add_argument("csv")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", parents=[common], help="train the ViT classifier")
    p.add_argument("train_csv")
    p.add_argument("--bundle", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--stop-at-accuracy", type=float, default=None)
    p.add_argument("--float64", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="metrics + confusion matrix CSV")
    p.add_argument("test_csv")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", parents=[common], help="classify records as JSON lines")
    p.add_argument("csv")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("watch", parents=[common], help="classify a node's pending pool")
    p.add_argument("--bundle", required=True)
    p.add_argument("--rpc-url", help="JSON-RPC endpoint (default: $CHAINVIT_RPC_URL)")
    p.add_argument("--auth-token")
    p.add_argument("--interval", type=float, default=2.0)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--max-polls", type=int, default=None)
    p.set_defaults(func=cmd_watch)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        dests = {a.dest for a in sp._actions if a.option_strings}
        values = {}
        for k, v in cfg.items():
            if k not in dests:
                continue
            action = next(a for a in sp._actions if a.dest == k)
            if isinstance(action, argparse._StoreTrueAction):
                values[k] = v.lower() in ("1", "true", "yes", "on")
            else:
                values[k] = v
        sp.set_defaults(**values)
        for a in sp._actions:
            if a.dest in values:
                a.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        print(f"chainvit: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    torch.manual_seed(args.seed)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"chainvit: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingDiverged, RpcError) as exc:
        print(f"chainvit: failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        log.debug("unhandled error", exc_info=True)
        print(f"chainvit: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
