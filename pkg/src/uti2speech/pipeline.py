"""On-disk pipeline steps shared by the command line and the experiment code.

Default layout under a work directory::

    corpus/{train,dev,test}/uttNNN.{ult,meta,param,f0}
    models/ae.model           + ae.model.log.jsonl
    features/<split>/uttNNN.feat + .feat.meta
    models/est.model          + est.model.json, est.model.log.jsonl
    pred/<split>/uttNNN.param
    wav/<split>/uttNNN.wav
    sweep/...                 models and sweep.json of a parameter sweep
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import autoenc, synthcorpus
from .config import PipelineConfig
from .dataset import Utterance, load_split, read_features, split_names, write_features
from .estimator import Estimator, ParallelUtterance, system_weight_count, train_estimator
from .evalmetrics import EvalReport, evaluate
from .nncore import load_model, save_model
from .vocoder import mglsa_synthesize, read_f0, read_params, write_params, write_wav

log = logging.getLogger(__name__)

SPLITS = synthcorpus.SPLITS


@dataclass(frozen=True)
class Workdir:
    root: Path

    def __init__(self, root):
        object.__setattr__(self, "root", Path(root))

    @property
    def corpus(self) -> Path:
        return self.root / "corpus"

    @property
    def ae_model(self) -> Path:
        return self.root / "models" / "ae.model"

    @property
    def est_model(self) -> Path:
        return self.root / "models" / "est.model"

    def features(self, split: str) -> Path:
        return self.root / "features" / split

    def pred(self, split: str) -> Path:
        return self.root / "pred" / split

    def wav(self, split: str) -> Path:
        return self.root / "wav" / split


class EpochLog:
    """Appends one JSON object per epoch to a ``.jsonl`` file."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("")

    def write(self, entry: dict) -> None:
        with self.path.open("a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def gen_corpus(cfg: PipelineConfig, out_dir) -> dict:
    return synthcorpus.generate_corpus(cfg.corpus, out_dir)


def _frames(utts: list[Utterance]) -> list[np.ndarray]:
    return [u.pixels() for u in utts]


def train_ae(cfg: PipelineConfig, corpus_dir, model_path) -> dict:
    """Train the autoencoder on train frames (dev for early stopping) and save it."""
    train_utts = load_split(corpus_dir, "train")
    dev_utts = load_split(corpus_dir, "dev")
    epochs = EpochLog(f"{model_path}.log.jsonl")
    result = autoenc.train_autoencoder(_frames(train_utts), cfg.autoencoder, _frames(dev_utts),
                                       on_epoch=lambda rec, _model: epochs.write(rec.as_dict()))
    Path(model_path).parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, model_path)
    return {"model": str(model_path), "bottleneck": cfg.autoencoder.bottleneck,
            "best_epoch": result.best_epoch, "dev_loss": result.best_loss,
            "epochs": len(result.history)}


def encode_split(model_path, corpus_dir, split: str, out_dir) -> list[str]:
    model = load_model(model_path)
    autoenc.check_autoencoder(model)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for utt in load_split(corpus_dir, split):
        write_features(out / f"{utt.name}.feat", autoenc.encode(model, utt.pixels()))
        names.append(utt.name)
    return names


def load_parallel(corpus_dir, split: str, feature_dir=None) -> list[ParallelUtterance]:
    """Targets from the corpus paired with encoded features, or pixels when ``feature_dir`` is None."""
    if feature_dir is None:
        return [ParallelUtterance(u.name, u.pixels(), u.targets)
                for u in load_split(corpus_dir, split)]
    utts = []
    for name in split_names(corpus_dir, split):
        targets = read_params(Path(corpus_dir) / split / f"{name}.param")
        feats = read_features(Path(feature_dir) / f"{name}.feat")
        utts.append(ParallelUtterance(name, feats, targets))
    return utts


def train_est(cfg: PipelineConfig, train_utts, dev_utts, model_path) -> dict:
    est_cfg = cfg.estimator
    epochs = EpochLog(f"{model_path}.log.jsonl")
    run = train_estimator(train_utts, dev_utts, est_cfg.spec, est_cfg.train, est_cfg.hidden,
                          est_cfg.depth, est_cfg.features, on_epoch=epochs.write)
    Path(model_path).parent.mkdir(parents=True, exist_ok=True)
    run.estimator.save(model_path)
    best = run.history[run.best_epoch - 1] if run.best_epoch else {}
    return {"model": str(model_path), "features": est_cfg.features, "window": est_cfg.window,
            "best_epoch": run.best_epoch, "dev_nmse": best.get("dev_nmse"),
            "epochs": len(run.history)}


def predict_split(est_path, corpus_dir, split: str, out_dir, feature_dir=None) -> list[str]:
    est = Estimator.load(est_path)
    if (est.feature_kind == "pixels") != (feature_dir is None):
        raise ValueError(f"estimator expects {est.feature_kind} features")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for utt in load_parallel(corpus_dir, split, feature_dir):
        write_params(out / f"{utt.name}.param", est.predict(utt.features))
        names.append(utt.name)
    return names


def synth_file(cfg: PipelineConfig, param_path, f0_path, wav_path, seed: int) -> dict:
    params = read_params(param_path, cfg.vocoder.dim)
    f0 = read_f0(f0_path)
    audio = mglsa_synthesize(params, f0, cfg.vocoder, seed)
    if not np.all(np.isfinite(audio)):
        raise FloatingPointError(f"synthesis of {param_path} produced non-finite samples")
    Path(wav_path).parent.mkdir(parents=True, exist_ok=True)
    clipped = write_wav(wav_path, audio, cfg.vocoder.sample_rate, normalize=True)
    return {"wav": str(wav_path), "frames": len(params), "samples": len(audio),
            "clipped": clipped}


def synth_split(cfg: PipelineConfig, pred_dir, corpus_dir, split: str, out_dir) -> list[dict]:
    pred = Path(pred_dir)
    names = sorted(p.stem for p in pred.glob("*.param"))
    if not names:
        raise FileNotFoundError(f"no .param files in {pred}")
    rows = []
    for i, name in enumerate(names):
        rows.append(synth_file(cfg, pred / f"{name}.param",
                               Path(corpus_dir) / split / f"{name}.f0",
                               Path(out_dir) / f"{name}.wav", [cfg.seed, i]))
    return rows


def eval_split(pred_dir, corpus_dir, split: str) -> EvalReport:
    """Score predicted parameter files against the corpus targets, frames pooled."""
    names = split_names(corpus_dir, split)
    preds, targets = [], []
    for name in names:
        p = Path(pred_dir) / f"{name}.param"
        if not p.exists():
            raise FileNotFoundError(f"missing prediction {p}")
        t = read_params(Path(corpus_dir) / split / f"{name}.param")
        y = read_params(p)
        if len(y) != len(t):
            raise ValueError(f"{name}: {len(y)} predicted frames but {len(t)} targets")
        preds.append(y)
        targets.append(t)
    return evaluate(np.concatenate(preds), np.concatenate(targets))


def run_sweep(cfg: PipelineConfig, workdir, regenerate: bool = False) -> list[dict]:
    """Train every configured (features, N, w) estimator and score it on the sweep split.

    The corpus is generated under ``workdir/corpus`` unless it already exists
    with a matching config hash.
    """
    wd = Workdir(workdir)
    manifest = wd.corpus / "manifest"
    current = f"config_hash={cfg.corpus.config_hash()}"
    if regenerate or not manifest.exists() or current not in manifest.read_text().splitlines():
        gen_corpus(cfg, wd.corpus)
    splits = {s: load_split(wd.corpus, s) for s in ("train", "dev", cfg.sweep.eval_split)}
    out = wd.root / "sweep"
    out.mkdir(parents=True, exist_ok=True)
    rows = []

    def fit(kind: str, n_bottleneck, width: int, feats: dict) -> dict:
        tag = f"{kind}_N{n_bottleneck}_w{width}" if n_bottleneck else f"{kind}_w{width}"
        sub = replace(cfg, estimator=replace(cfg.estimator, window=width, features=kind))
        par = {s: [ParallelUtterance(u.name, f, u.targets) for u, f in zip(splits[s], feats[s])]
               for s in splits}
        t0 = time.time()
        info = train_est(sub, par["train"], par["dev"], out / f"{tag}.model")
        est = Estimator.load(out / f"{tag}.model")
        ev = par[cfg.sweep.eval_split]
        report = evaluate(np.concatenate([est.predict(u.features) for u in ev]),
                          np.concatenate([u.targets for u in ev]))
        row = {"features": kind, "N": n_bottleneck, "window": width,
               "weights": system_weight_count(n_bottleneck or autoenc.PIXELS, width,
                                              autoenc.PIXELS if n_bottleneck else None,
                                              cfg.estimator.hidden, cfg.estimator.depth),
               "split": cfg.sweep.eval_split, "nmse": report.nmse_mean, "corr": report.corr_mean,
               "best_epoch": info["best_epoch"], "seconds": round(time.time() - t0, 1)}
        log.info("sweep row %s", row)
        rows.append(row)
        return row

    for n in cfg.sweep.bottlenecks:
        ae_cfg = replace(cfg.autoencoder, bottleneck=n)
        result = autoenc.train_autoencoder(_frames(splits["train"]), ae_cfg, _frames(splits["dev"]))
        save_model(result.model, out / f"ae_N{n}.model")
        feats = {s: [autoenc.encode(result.model, u.pixels()) for u in splits[s]] for s in splits}
        for w in cfg.sweep.windows:
            fit("ae", n, w, feats)
    if cfg.sweep.pixel_windows:
        feats = {s: [u.pixels() for u in splits[s]] for s in splits}
        for w in cfg.sweep.pixel_windows:
            fit("pixels", None, w, feats)
    (out / "sweep.json").write_text(json.dumps(rows, indent=1) + "\n")
    return rows


def format_sweep(rows: list[dict]) -> str:
    lines = [f"{'features':<8} {'N':>5} {'w':>3} {'weights':>12} {'nmse':>8} {'corr':>8}"]
    for r in rows:
        n = "-" if r["N"] is None else str(r["N"])
        lines.append(f"{r['features']:<8} {n:>5} {r['window']:>3} {r['weights']:>12,d} "
                     f"{r['nmse']:>8.4f} {r['corr']:>8.4f}")
    return "\n".join(lines)
