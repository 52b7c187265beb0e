import numpy as np
import pytest

from uti2speech import synthcorpus as sc
from uti2speech.dataset import load_split, load_utterance, read_features, split_names, write_features
from uti2speech.vocoder import write_f0

TINY = sc.CorpusConfig(n_train=2, n_dev=1, n_test=1, frames_per_utterance=6, seed=2)


def test_feature_file_roundtrip(tmp_path):
    feats = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
    write_features(tmp_path / "a.feat", feats)
    assert (tmp_path / "a.feat").stat().st_size == 7 * 5 * 4
    assert "frames=7" in (tmp_path / "a.feat.meta").read_text()
    assert np.array_equal(read_features(tmp_path / "a.feat"), feats)
    # little-endian frame-major layout
    assert np.frombuffer((tmp_path / "a.feat").read_bytes()[:4], "<f4")[0] == feats[0, 0]


def test_feature_file_errors(tmp_path):
    with pytest.raises(ValueError):
        write_features(tmp_path / "a.feat", np.zeros(5))
    (tmp_path / "b.feat").write_bytes(bytes(12))
    with pytest.raises(FileNotFoundError):
        read_features(tmp_path / "b.feat")
    (tmp_path / "b.feat.meta").write_text("frames=2\nN=2\n")
    with pytest.raises(ValueError, match="bytes"):
        read_features(tmp_path / "b.feat")


def test_load_split(tmp_path):
    sc.generate_corpus(TINY, tmp_path)
    assert split_names(tmp_path, "train") == ["utt000", "utt001"]
    utts = load_split(tmp_path, "train")
    assert [u.name for u in utts] == ["utt000", "utt001"]
    assert utts[0].pixels().shape == (6, 8192) and utts[0].fps == 82.0
    lean = load_split(tmp_path, "dev", with_frames=False)
    assert lean[0].frames is None
    with pytest.raises(ValueError):
        lean[0].pixels()
    with pytest.raises(FileNotFoundError):
        split_names(tmp_path, "nope")


def test_length_mismatch_detected(tmp_path):
    sc.generate_corpus(TINY, tmp_path)
    write_f0(tmp_path / "test" / "utt000.f0", np.zeros(5))
    with pytest.raises(ValueError, match="F0"):
        load_utterance(tmp_path, "test", "utt000")
