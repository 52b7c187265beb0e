"""Command-line entry point: ``uti2speech <command> [--config FILE] [--seed N] [--out DIR] [--json]``.

Commands run one pipeline step each and read/write the standard layout under
the work directory (see :mod:`uti2speech.pipeline`). A failure prints a
single ``error: <Type>: <message>`` line on stderr and exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import pipeline
from .config import FEATURE_KINDS, load_config
from .estimator import Estimator
from .pipeline import Workdir

log = logging.getLogger("uti2speech")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON pipeline config (defaults when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="work directory (overrides paths.workdir)")
    p.add_argument("--json", action="store_true", help="print the result as one JSON object")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uti2speech",
                                     description="Ultrasound tongue images to speech pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write the synthetic parallel corpus")
    _common(p)

    p = sub.add_parser("train-ae", help="train the autoencoder on corpus frames")
    _common(p)
    p.add_argument("--bottleneck", type=int, help="bottleneck size N")
    p.add_argument("--model", help="output model path")

    p = sub.add_parser("encode", help="write bottleneck features for corpus splits")
    _common(p)
    p.add_argument("--split", choices=pipeline.SPLITS, action="append",
                   help="split to encode (repeatable; default all)")
    p.add_argument("--model", help="autoencoder model path")

    p = sub.add_parser("train-est", help="train the parameter estimator")
    _common(p)
    p.add_argument("--features", choices=FEATURE_KINDS, help="autoencoder features or raw pixels")
    p.add_argument("--window", type=int, help="number of frames w in the input window")
    p.add_argument("--model", help="output model path")

    p = sub.add_parser("predict", help="write predicted parameter files for a split")
    _common(p)
    p.add_argument("--split", choices=pipeline.SPLITS, default="test")
    p.add_argument("--model", help="estimator model path")

    p = sub.add_parser("synth", help="render WAV files from parameter and F0 files")
    _common(p)
    p.add_argument("--split", choices=pipeline.SPLITS, default="test")
    p.add_argument("--params", help="single parameter file (with --f0 and --wav)")
    p.add_argument("--f0", help="single F0 file")
    p.add_argument("--wav", help="single output WAV path")

    p = sub.add_parser("eval", help="score predictions against corpus targets")
    _common(p)
    p.add_argument("--split", choices=pipeline.SPLITS, default="test")
    p.add_argument("--pred", help="directory of predicted .param files")

    p = sub.add_parser("sweep", help="train and score all configured (N, w) combinations")
    _common(p)
    p.add_argument("--regenerate", action="store_true", help="rebuild the corpus first")
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = replace(cfg, workdir=args.out)
    return cfg, Workdir(cfg.workdir)


def _feature_dir(cfg, wd: Workdir, split: str):
    return None if cfg.estimator.features == "pixels" else wd.features(split)


def run(args) -> dict:
    cfg, wd = _load(args)
    cmd = args.command
    if cmd == "gen-corpus":
        manifest = pipeline.gen_corpus(cfg, wd.corpus)
        return {"corpus": str(wd.corpus), "seed": manifest["seed"],
                "config_hash": manifest["config_hash"],
                **{s: len(manifest[s].split(",")) for s in pipeline.SPLITS}}
    if cmd == "train-ae":
        if args.bottleneck is not None:
            cfg = replace(cfg, autoencoder=replace(cfg.autoencoder, bottleneck=args.bottleneck))
        return pipeline.train_ae(cfg, wd.corpus, args.model or wd.ae_model)
    if cmd == "encode":
        model = args.model or wd.ae_model
        splits = args.split or list(pipeline.SPLITS)
        return {s: len(pipeline.encode_split(model, wd.corpus, s, wd.features(s))) for s in splits}
    if cmd == "train-est":
        est = cfg.estimator
        if args.features is not None:
            est = replace(est, features=args.features)
        if args.window is not None:
            est = replace(est, window=args.window)
        cfg = replace(cfg, estimator=est)
        train = pipeline.load_parallel(wd.corpus, "train", _feature_dir(cfg, wd, "train"))
        dev = pipeline.load_parallel(wd.corpus, "dev", _feature_dir(cfg, wd, "dev"))
        return pipeline.train_est(cfg, train, dev, args.model or wd.est_model)
    if cmd == "predict":
        model = args.model or wd.est_model
        kind = Estimator.load(model).feature_kind
        feat_dir = None if kind == "pixels" else wd.features(args.split)
        names = pipeline.predict_split(model, wd.corpus, args.split, wd.pred(args.split), feat_dir)
        return {"split": args.split, "predicted": len(names), "dir": str(wd.pred(args.split))}
    if cmd == "synth":
        single = (args.params, args.f0, args.wav)
        if any(single):
            if not all(single):
                raise ValueError("--params, --f0 and --wav must be given together")
            return pipeline.synth_file(cfg, args.params, args.f0, args.wav, cfg.seed)
        rows = pipeline.synth_split(cfg, wd.pred(args.split), wd.corpus, args.split,
                                    wd.wav(args.split))
        return {"split": args.split, "files": rows}
    if cmd == "eval":
        report = pipeline.eval_split(args.pred or wd.pred(args.split), wd.corpus, args.split)
        return {"split": args.split, **report.to_dict()}
    if cmd == "sweep":
        rows = pipeline.run_sweep(cfg, wd.root, args.regenerate)
        return {"rows": rows}
    raise ValueError(f"unknown command {cmd!r}")


def _print(cmd: str, result: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(result, sort_keys=True))
    elif cmd == "sweep":
        print(pipeline.format_sweep(result["rows"]))
    elif cmd == "synth" and "files" in result:
        for row in result["files"]:
            print(" ".join(f"{k}={v}" for k, v in row.items()))
    else:
        for key, value in result.items():
            if isinstance(value, list):
                value = " ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in value)
            print(f"{key}={value}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        result = run(args)
    except Exception as exc:  # one machine-parsable line, no traceback
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    _print(args.command, result, args.json)
    return 0


if __name__ == "__main__":
    sys.exit(main())
