"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed when each test runs and again in the terminal summary
under ``acceptance criteria``.
"""

import json
import time
from pathlib import Path
from statistics import median

import numpy as np
import pytest

from uti2speech import autoenc as ae
from uti2speech.cli import main
from uti2speech.config import PipelineConfig
from uti2speech.estimator import system_weight_count
from uti2speech.evalmetrics import nmse, pearson
from uti2speech.nncore import backward, init_mlp, layer_chain, regularized_loss
from uti2speech.pipeline import run_sweep
from uti2speech.vocoder import (
    MglsaFilter, VocoderConfig, b2mc, coeff_to_lsp, frame_filter_coefficients, gnorm, ignorm,
    lsp_to_coeff, make_excitation, mc2b, mglsa_synthesize, read_wav,
)

# (feature dim, frames, encoder input or None, printed millions)
SIZE_ROWS = [
    (8192, 1, None, 12.6), (8192, 5, None, 46.2),
    (64, 1, 8192, 4.8), (64, 9, 8192, 5.3),
    (256, 1, 8192, 6.6), (256, 9, 8192, 8.7), (256, 13, 8192, 9.7),
    (512, 1, 8192, 8.9), (512, 5, 8192, 11.0), (512, 9, 8192, 13.1),
]
ENCODER_SIZES = {64: 0.5, 128: 1.0, 256: 2.1, 512: 4.2}


def test_criterion_1_weight_counts(acceptance):
    t0 = time.perf_counter()
    worst = max(abs(system_weight_count(n, w, e) / 1e6 - printed) for n, w, e, printed in SIZE_ROWS)
    enc_exact = all(ae.encoder_weight_count(8192, n) == 8192 * n for n in ENCODER_SIZES)
    enc_rounded = all(round(8192 * n / 1e6, 1) == m for n, m in ENCODER_SIZES.items())
    seconds = time.perf_counter() - t0
    ok = worst <= 0.05 and enc_exact and enc_rounded and seconds < 1.0
    acceptance(1, ok, f"{len(SIZE_ROWS)} rows, worst deviation {worst:.4f}M (<= 0.05M); "
                      f"encoder sizes 8192*N exact={enc_exact}; {seconds:.3f} s")
    assert ok


def _numeric_gradients(model, x, y, lam, h=1e-6):
    grads = []
    for p in model.parameters():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = regularized_loss(model, x, y, lam)
            p[idx] = old - h
            down = regularized_loss(model, x, y, lam)
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def test_criterion_2_gradient_check(acceptance):
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        dims = [int(d) for d in rng.integers(1, 8, size=int(rng.integers(2, 5)))]
        model = init_mlp(layer_chain(dims), seed=seed, dtype=np.float64)
        for b in model.biases:
            b += rng.normal(scale=0.3, size=b.shape)
        x = rng.normal(size=(4, dims[0]))
        y = rng.normal(size=(4, dims[-1]))
        lam = float(rng.choice([0.0, 1e-3, 1e-2]))
        _, g = backward(model, x, y, lam)
        for a, n in zip(g.parameters(), _numeric_gradients(model, x, y, lam)):
            # norm-wise relative error per parameter tensor
            scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
            worst = max(worst, float(np.linalg.norm(a - n) / scale))
    ok = worst < 1e-4
    acceptance(2, ok, f"50 random float64 nets, max relative error {worst:.2e} (< 1e-4)")
    assert ok


def _random_lsp(rng, order, min_gap=0.01):
    free = np.pi - (order + 1) * min_gap
    return np.sort(rng.uniform(0, free, order)) + min_gap * np.arange(1, order + 1)


def _impulse_response_error_db(seed, cfg, n_samples=16384):
    rng = np.random.default_rng(seed)
    lsp = np.arange(1, 25) * np.pi / 25 + rng.uniform(-0.04, 0.04, 24)
    v = np.concatenate([[rng.uniform(-1, 1)], lsp])
    gains, coefs = frame_filter_coefficients(v[None, :], cfg)
    x = np.zeros(n_samples + 2 * int(cfg.frame_shift))
    x[0] = 1.0
    h = MglsaFilter(cfg).process(x, gains[0], coefs[0])[:n_samples]
    spec = np.abs(np.fft.rfft(h))
    grid = np.arange(64) * (n_samples // 2) // 64 + 32
    omega = np.pi * grid / (n_samples // 2)
    a = np.concatenate([[1.0], lsp_to_coeff(v)[1:]])
    z1 = np.exp(-1j * omega)
    zt = (z1 - cfg.alpha) / (1 - cfg.alpha * z1)
    ref = np.exp(v[0]) * np.abs(np.polyval(a[::-1], zt)) ** (1 / cfg.gamma)
    return float(np.max(np.abs(20 * np.log10(spec[grid] / ref))))


def test_criterion_3_vocoder_math(acceptance):
    rng = np.random.default_rng(0)
    cfg = VocoderConfig()
    lsp_err = 0.0
    for _ in range(1000):
        order = int(rng.integers(2, 25))
        v = np.concatenate([[rng.normal()], _random_lsp(rng, order)])
        lsp_err = max(lsp_err, float(np.max(np.abs(coeff_to_lsp(lsp_to_coeff(v)) - v))))
    mc_err = gn_err = 0.0
    for _ in range(1000):
        c = rng.uniform(-2, 2, size=int(rng.integers(1, 26)))
        alpha = float(rng.uniform(-0.95, 0.95))
        mc_err = max(mc_err, float(np.max(np.abs(b2mc(mc2b(c, alpha), alpha) - c))))
        b = np.concatenate([[rng.uniform(-0.9, 0.9)], rng.uniform(-2, 2, size=24)])
        gamma = float(rng.choice([-1.0, -0.5, -1 / 3]))
        k, bn = gnorm(b, gamma)
        gn_err = max(gn_err, float(np.max(np.abs(ignorm(k, bn, gamma) - b))))
    # zero spectrum: unit gain, zero coefficients
    f0 = np.where(np.arange(40) < 20, 0.0, 120.0)
    exc = make_excitation(f0, cfg, seed=1)
    n = len(exc)
    flat = np.tile(np.concatenate([[0.0], np.arange(1, 25) * np.pi / 25]), (40, 1))
    width = frame_filter_coefficients(flat, cfg)[1].shape[1]
    identity = np.array_equal(MglsaFilter(cfg).process(exc, np.ones(n), np.zeros((n, width))), exc)
    identity &= float(np.max(np.abs(mglsa_synthesize(flat, f0, cfg, seed=1) - exc))) < 1e-9
    db = max(_impulse_response_error_db(seed, cfg) for seed in range(3))
    ok = lsp_err < 1e-8 and mc_err < 1e-12 and gn_err < 1e-12 and identity and db < 0.1
    acceptance(3, ok, f"LSP round-trip {lsp_err:.1e} (< 1e-8), mc2b/b2mc {mc_err:.1e}, "
                      f"gnorm/ignorm {gn_err:.1e} (< 1e-12), zero-spectrum identity={identity}, "
                      f"impulse response {db:.4f} dB (< 0.1)")
    assert ok


def test_criterion_4_metric_definitions(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    target = rng.normal(size=(300, 25)) * np.linspace(0.01, 5, 25) + np.linspace(-3, 3, 25)
    mean_pred = np.broadcast_to(target.mean(axis=0), target.shape)
    _, per_dim = nmse(mean_pred, target)
    mean_one = bool(np.all(per_dim == 1.0))
    e_id, _ = nmse(target, target)
    r_id, per_r = pearson(target, target)
    identity = e_id == 0.0 and np.allclose(per_r, 1.0, atol=1e-12)
    pred = target + rng.normal(size=target.shape)
    base = pearson(pred, target)[1]
    affine = all(np.allclose(pearson(a * pred + b, target)[1], base, atol=1e-12)
                 for a, b in [(2.5, -1.0), (0.01, 40.0), (300.0, 0.3)])
    seconds = time.perf_counter() - t0
    ok = mean_one and identity and affine and seconds < 1.0
    acceptance(4, ok, f"mean predictor NMSE==1 exactly={mean_one}, identity NMSE 0 / corr 1={identity}, "
                      f"Pearson affine invariance={affine}; {seconds:.3f} s")
    assert ok


@pytest.mark.slow
def test_criterion_5_comparative_sweep(acceptance, tmp_path):
    t0 = time.perf_counter()
    scores = {"ae9": [], "ae1": [], "pix1": []}
    for seed in (1, 2, 3):
        cfg = PipelineConfig().with_seed(seed)
        assert cfg.sweep.eval_split == "dev"
        assert cfg.autoencoder.bottleneck >= cfg.corpus.latent_dim
        for row in run_sweep(cfg, tmp_path / f"seed{seed}"):
            key = ("ae" if row["features"] == "ae" else "pix") + str(row["window"])
            if key in scores:
                scores[key].append(row["nmse"])
    seconds = time.perf_counter() - t0
    med = {k: median(v) for k, v in scores.items()}
    a = med["ae9"] < med["pix1"]
    b = med["ae9"] < med["ae1"]
    ok = a and b and seconds < 1800
    per_seed = ", ".join(f"{k}={[round(x, 4) for x in v]}" for k, v in scores.items())
    acceptance(5, ok, f"median dev NMSE ae(w=9) {med['ae9']:.4f} < pixels(w=1) {med['pix1']:.4f}: {a}; "
                      f"ae(w=9) < ae(w=1) {med['ae1']:.4f}: {b}; {seconds / 60:.1f} min (< 30); "
                      f"per seed {per_seed}")
    assert ok


def _cli(*args):
    code = main([str(a) for a in args])
    assert code == 0, f"command {args[0]} failed"


@pytest.mark.slow
def test_criterion_6_end_to_end_smoke(acceptance, tmp_path, capsys):
    cfg = PipelineConfig()
    work = tmp_path / "work"
    for cmd in ("gen-corpus", "train-ae", "encode", "train-est", "predict"):
        _cli(cmd, "--out", work)
    capsys.readouterr()
    _cli("synth", "--out", work, "--json")
    files = json.loads(capsys.readouterr().out)["files"]
    fps = cfg.corpus.fps
    worst_frames, nan_free, worst_clip = 0.0, True, 0.0
    for row in files:
        audio, rate = read_wav(row["wav"])
        duration = len(audio) / rate
        worst_frames = max(worst_frames, abs(duration - row["frames"] / fps) * fps)
        nan_free &= bool(np.all(np.isfinite(audio)))
        full_scale = np.count_nonzero(np.abs(audio) >= 32767 / 32768)
        worst_clip = max(worst_clip, (row["clipped"] + full_scale) / len(audio))
    n_test = cfg.corpus.n_test
    ok = len(files) == n_test and worst_frames <= 1.0 and nan_free and worst_clip < 0.01
    acceptance(6, ok, f"{len(files)}/{n_test} test WAVs, worst duration error {worst_frames:.3f} frames "
                      f"(<= 1), no NaN={nan_free}, worst clipped fraction {worst_clip:.4%} (< 1%)")
    assert ok


DETERMINISM_CONFIG = {
    "seed": 5,
    "corpus": {"n_train": 3, "n_dev": 2, "n_test": 2, "frames_per_utterance": 30},
    "autoencoder": {"bottleneck": 16, "train": {"batch_size": 16, "max_epochs": 3, "patience": 3}},
    "estimator": {"window": 9, "hidden": 64, "depth": 2, "train": {"max_epochs": 3, "patience": 3}},
    "sweep": {"bottlenecks": [16], "windows": [1, 9], "pixel_windows": [1]},
}


def _run_all_stages(config, work, capsys) -> dict:
    common = ["--config", config, "--out", work]
    reports = {}
    for cmd in ("gen-corpus", "train-ae", "encode", "train-est", "predict", "synth"):
        _cli(cmd, *common)
    capsys.readouterr()
    _cli("eval", *common, "--json")
    reports["eval"] = capsys.readouterr().out
    _cli("train-est", *common, "--features", "pixels", "--window", "1", "--model", work / "pix.model")
    capsys.readouterr()
    _cli("sweep", *common, "--json")
    rows = json.loads(capsys.readouterr().out)["rows"]
    reports["sweep"] = json.dumps([{k: v for k, v in r.items() if k != "seconds"} for r in rows])
    return reports


def _artifacts(work: Path) -> dict:
    keep = {".model", ".json", ".feat", ".param", ".f0", ".ult", ".meta", ".wav"}
    return {str(p.relative_to(work)): p.read_bytes()
            for p in sorted(work.rglob("*")) if p.is_file() and p.suffix in keep}


@pytest.mark.slow
def test_criterion_7_determinism(acceptance, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(DETERMINISM_CONFIG))
    runs = [(_run_all_stages(config, tmp_path / name, capsys), _artifacts(tmp_path / name))
            for name in ("a", "b")]
    (rep_a, files_a), (rep_b, files_b) = runs
    differing = sorted(k for k in files_a.keys() | files_b.keys() if files_a.get(k) != files_b.get(k))
    kinds = sorted({Path(k).suffix for k in files_a})
    ok = not differing and rep_a == rep_b and len(files_a) > 0
    acceptance(7, ok, f"all stages run twice: {len(files_a)} files ({' '.join(kinds)}) bit-identical="
                      f"{not differing}, eval and sweep reports identical={rep_a == rep_b}")
    assert ok, differing[:5]
