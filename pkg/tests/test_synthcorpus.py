import hashlib
from dataclasses import replace

import numpy as np
import pytest

from uti2speech import nncore, synthcorpus as sc, uspre
from uti2speech.dataset import load_split
from uti2speech.evalmetrics import nmse
from uti2speech.estimator import WindowSpec, assemble_windows
from uti2speech.vocoder import read_f0, read_params
from uti2speech.vocoder.lsp import check_lsp

SMALL = sc.CorpusConfig(n_train=2, n_dev=1, n_test=1, frames_per_utterance=12, seed=5)


def test_trajectory_deterministic_and_bounded():
    a = sc.sample_trajectory(SMALL, sc.utterance_rng(SMALL, "train", 0))
    b = sc.sample_trajectory(SMALL, sc.utterance_rng(SMALL, "train", 0))
    assert np.array_equal(a, b)
    assert a.shape == (12, 8)
    assert np.all(np.abs(a) <= 1)
    assert np.max(np.abs(np.diff(a, axis=0))) <= SMALL.max_delta + 1e-12


def test_long_smoothing_window_is_nearly_constant():
    cfg = replace(SMALL, smoothing_window=300, frames_per_utterance=100)
    traj = sc.sample_trajectory(cfg, np.random.default_rng(0))
    assert np.max(np.abs(np.diff(traj, axis=0))) < 0.01


def test_zero_noise_walk_is_zero():
    cfg = replace(SMALL, latent_dim=1, walk_sigma=0.0)
    assert not sc.sample_trajectory(cfg, np.random.default_rng(0)).any()


def test_render_canonical_contour():
    cfg = replace(SMALL, speckle_noise_sigma=0.0)
    frame = sc.render_frame(np.zeros(8), cfg)
    assert frame.shape == (64, 946) and frame.dtype == np.uint8
    depth = sc.contour_depth(np.zeros(8), cfg)
    for beam in (0, 20, 63):
        # rounding flattens the top of the profile; its centre is the contour
        top = np.flatnonzero(frame[beam] == frame[beam].max())
        assert abs(top.mean() - depth[beam]) <= 0.5
        assert frame[beam].max() == sc.CONTOUR_PEAK
    assert frame.min() == sc.BACKGROUND
    on_contour = frame[np.arange(64), np.rint(depth).astype(int)]
    assert np.all(on_contour > sc.BACKGROUND)


def test_distinct_latents_give_distinct_frames():
    cfg = replace(SMALL, speckle_noise_sigma=0.0)
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b = rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8)
        differ = np.mean(sc.render_frame(a, cfg) != sc.render_frame(b, cfg))
        assert differ >= 0.01


def test_render_with_same_seed_is_identical():
    lat = np.linspace(-1, 1, 8)
    a = sc.render_frame(lat, SMALL, np.random.default_rng(9))
    b = sc.render_frame(lat, SMALL, np.random.default_rng(9))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        sc.render_frame(lat, SMALL)


def test_zero_window_gives_base_grid():
    window = np.zeros((5, 8))
    t = sc.latents_to_target(window, SMALL)
    assert t[0] == SMALL.gain_base
    assert np.allclose(t[1:], np.arange(1, 25) * np.pi / 25, atol=1e-15)
    assert np.array_equal(t, sc.latents_to_target(window, SMALL))


def test_target_margin_worst_case():
    rng = np.random.default_rng(0)
    mixing = sc.mixing_matrix(SMALL)
    windows = rng.uniform(-1, 1, size=(100_000, 5, 8))
    windows[::2] = np.sign(windows[::2])  # saturated corners
    spacing = np.pi / 25
    lsp = sc.base_lsp() + 0.4 * spacing * np.tanh(windows.reshape(len(windows), -1) @ mixing.T)
    gaps = np.diff(lsp, axis=1)
    assert gaps.min() >= 0.01 and lsp.min() > 0.01 and lsp.max() < np.pi - 0.01
    for w in windows[:200]:
        check_lsp(sc.latents_to_target(w, SMALL, mixing)[1:], 0.01)


def test_target_window_shape_checked():
    with pytest.raises(ValueError):
        sc.latents_to_target(np.zeros((3, 8)), SMALL)


def test_f0_pattern():
    f0 = sc.sample_f0(400, np.random.default_rng(0))
    voiced = f0 > 0
    assert voiced.any() and (~voiced).any()
    assert f0[voiced].min() >= 120 - 1e-9 and f0[voiced].max() <= 180 + 1e-9


def file_digests(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_corpus_layout_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    manifest = sc.generate_corpus(SMALL, a)
    sc.generate_corpus(SMALL, b)
    assert file_digests(a) == file_digests(b)
    for split, count in SMALL.counts().items():
        files = sorted(p.name for p in (a / split).iterdir())
        assert len(files) == 4 * count
        assert manifest[split] == ",".join(f"utt{i:03d}" for i in range(count))
    text = (a / "manifest").read_text()
    assert f"seed={SMALL.seed}" in text and f"config_hash={SMALL.config_hash()}" in text


def test_generated_files_load_and_validate(tmp_path):
    sc.generate_corpus(SMALL, tmp_path)
    for split in sc.SPLITS:
        for utt in load_split(tmp_path, split):
            assert utt.frames.shape == (12, 64, 128)
            assert utt.targets.shape == (12, 25)
            for frame in utt.targets:
                check_lsp(frame[1:], 0.01)
    raw, fps = uspre.load_ult(tmp_path / "train" / "utt001.ult")
    utt = sc.generate_utterance(SMALL, "train", 1)
    assert np.array_equal(raw, utt.raw) and fps == 82.0
    assert np.allclose(read_params(tmp_path / "train" / "utt001.param"), utt.targets, atol=1e-6)
    assert np.array_equal(read_f0(tmp_path / "train" / "utt001.f0"), utt.f0.astype(np.float32))


def test_default_counts():
    cfg = sc.CorpusConfig()
    assert cfg.counts() == {"train": 31, "dev": 4, "test": 9}


def test_seed_changes_corpus():
    a = sc.generate_utterance(SMALL, "train", 0)
    b = sc.generate_utterance(replace(SMALL, seed=6), "train", 0)
    assert not np.array_equal(a.raw, b.raw)


def latent_windows(cfg, split, count):
    mixing = sc.mixing_matrix(cfg)
    xs, ys = [], []
    for i in range(count):
        lat = sc.sample_trajectory(cfg, sc.utterance_rng(cfg, split, i))
        xs.append(assemble_windows(lat, WindowSpec(2 * cfg.context_radius + 1)))
        ys.append(sc.trajectory_targets(lat, cfg, mixing))
    return np.concatenate(xs), np.concatenate(ys)


def test_linear_target_map_is_exactly_linear_in_latent_window():
    cfg = replace(SMALL, target_map="linear", frames_per_utterance=120)
    x, y = latent_windows(cfg, "train", 4)
    xd, yd = latent_windows(cfg, "dev", 2)
    a = np.c_[x, np.ones(len(x))]
    coef = np.linalg.lstsq(a, y, rcond=None)[0]
    pred = np.c_[xd, np.ones(len(xd))] @ coef
    assert nmse(pred, yd)[0] < 1e-20
    # a single frame cannot explain the neighbourhood-dependent targets
    r = cfg.context_radius * cfg.latent_dim
    centre = slice(r, r + cfg.latent_dim)
    coef1 = np.linalg.lstsq(np.c_[x[:, centre], np.ones(len(x))], y, rcond=None)[0]
    pred1 = np.c_[xd[:, centre], np.ones(len(xd))] @ coef1
    assert nmse(pred1, yd)[0] > 0.05


def test_tanh_targets_learnable_from_latent_windows():
    """With the autoencoder replaced by the latents themselves, a small net fits the targets."""
    cfg = replace(SMALL, frames_per_utterance=120)
    x, y = latent_windows(cfg, "train", 20)
    xd, yd = latent_windows(cfg, "dev", 3)
    mean, std = y.mean(0), y.std(0)
    model = nncore.init_mlp(nncore.layer_chain([x.shape[1], 128, 25]), seed=0)
    tc = nncore.TrainConfig(learning_rate=3e-3, batch_size=32, max_epochs=150, patience=20, l2_lambda=0)
    res = nncore.train(model, x, (y - mean) / std, tc, dev=(xd, (yd - mean) / std))
    pred = nncore.forward(res.model, xd) * std + mean
    assert nmse(pred, yd)[0] < 0.06


def test_linear_targets_respect_margin():
    cfg = replace(SMALL, target_map="linear")
    rng = np.random.default_rng(3)
    mixing = sc.mixing_matrix(cfg)
    for w in np.sign(rng.uniform(-1, 1, size=(500, 5, 8))):
        check_lsp(sc.latents_to_target(w, cfg, mixing)[1:], 0.01)
    with pytest.raises(ValueError):
        sc.CorpusConfig(target_map="cubic")
