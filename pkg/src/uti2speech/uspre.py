"""Raw ultrasound ingestion and resizing to the 64x128 network input.

A raw frame is 64 beams of 946 echo samples, stored as unsigned bytes.
Only the sample axis is resampled: 946 -> 128 with a separable Catmull-Rom
cubic kernel (a = -0.5), half-pixel-centred coordinates and clamp-to-edge
extension. Resizing happens in the intensity domain, then values are
divided by 255.

Raw container: a headerless ``.ult`` byte file (frame-major, beam-major
inside a frame) plus a ``.meta`` sidecar of ``key=value`` lines with
``frames``, ``beams``, ``samples`` and ``fps``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_BEAMS = 64
N_SAMPLES = 946
OUT_SAMPLES = 128
FRAME_BYTES = N_BEAMS * N_SAMPLES
DEFAULT_FPS = 82.0


def normalize(raw) -> np.ndarray:
    """Map intensities in [0, 255] to [0, 1]."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise ValueError(f"intensities outside [0, 255]: min {raw.min()}, max {raw.max()}")
    return raw / 255.0


def cubic_weights(t, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution weights for taps at offsets -1, 0, 1, 2 from ``floor(x)``."""
    t = np.asarray(t, dtype=np.float64)[..., None]
    d = np.abs(np.array([-1.0, 0.0, 1.0, 2.0]) - t)
    near = ((a + 2) * d - (a + 3)) * d * d + 1
    far = ((a * d - 5 * a) * d + 8 * a) * d - 4 * a
    return np.where(d <= 1, near, np.where(d < 2, far, 0.0))


def resample_matrix(n_in: int, n_out: int, a: float = -0.5) -> np.ndarray:
    """Dense ``(n_out, n_in)`` matrix performing 1-D cubic resampling."""
    scale = n_in / n_out
    x = (np.arange(n_out) + 0.5) * scale - 0.5
    base = np.floor(x).astype(int)
    w = cubic_weights(x - base, a)
    mat = np.zeros((n_out, n_in))
    for k, off in enumerate((-1, 0, 1, 2)):
        idx = np.clip(base + off, 0, n_in - 1)
        np.add.at(mat, (np.arange(n_out), idx), w[:, k])
    return mat


_RESIZE = resample_matrix(N_SAMPLES, OUT_SAMPLES)


def resize_samples(raw, n_out: int = OUT_SAMPLES) -> np.ndarray:
    """Resample the last axis to ``n_out`` points; no clamping or scaling."""
    raw = np.asarray(raw, dtype=np.float64)
    mat = _RESIZE if (raw.shape[-1], n_out) == (N_SAMPLES, OUT_SAMPLES) else \
        resample_matrix(raw.shape[-1], n_out)
    return raw @ mat.T


def resize_bicubic(raw) -> np.ndarray:
    """64x946 raw frame (or stack of frames) -> 64x128 image(s) in [0, 1]."""
    raw = np.asarray(raw)
    if raw.shape[-2:] != (N_BEAMS, N_SAMPLES):
        raise ValueError(f"raw frame must be {N_BEAMS}x{N_SAMPLES}, got {raw.shape[-2:]}")
    if raw.size and (raw.min() < 0 or raw.max() > 255):
        raise ValueError("raw intensities outside [0, 255]")
    return np.clip(resize_samples(raw) / 255.0, 0.0, 1.0)


@dataclass
class FrameSequence:
    frames: np.ndarray  # (n, 64, 128), values in [0, 1]
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        if self.frames.ndim != 3 or len(self.frames) == 0:
            raise ValueError("frame sequence must be a non-empty (n, rows, cols) array")
        if not self.fps > 0:
            raise ValueError("fps must be positive")

    def __len__(self):
        return len(self.frames)

    def flat(self) -> np.ndarray:
        """Frames flattened row-major (beam-major) to ``(n, 8192)``."""
        return self.frames.reshape(len(self.frames), -1)


def read_meta(path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: malformed line {line!r}")
        meta[key.strip()] = value.strip()
    return meta


def write_meta(path, meta: dict) -> None:
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))


def save_ult(path, frames: np.ndarray, fps: float = DEFAULT_FPS) -> None:
    """Write raw uint8 frames ``(n, 64, 946)`` and the ``.meta`` sidecar next to them."""
    frames = np.asarray(frames)
    if frames.ndim != 3 or frames.shape[1:] != (N_BEAMS, N_SAMPLES):
        raise ValueError(f"expected (n, {N_BEAMS}, {N_SAMPLES}) frames, got {frames.shape}")
    if frames.dtype != np.uint8:
        if frames.size and (frames.min() < 0 or frames.max() > 255):
            raise ValueError("raw intensities outside [0, 255]")
        frames = frames.astype(np.uint8)
    path = Path(path)
    path.write_bytes(frames.tobytes())
    write_meta(path.with_suffix(".meta"), {"frames": len(frames), "beams": N_BEAMS,
                                           "samples": N_SAMPLES, "fps": repr(float(fps))})


def load_ult(path, meta_path=None) -> tuple[np.ndarray, float]:
    """Read a ``.ult`` file; returns uint8 frames ``(n, 64, 946)`` and the fps."""
    path = Path(path)
    meta_path = Path(meta_path) if meta_path is not None else path.with_suffix(".meta")
    if not meta_path.exists():
        raise FileNotFoundError(f"missing metadata sidecar {meta_path}")
    meta = read_meta(meta_path)
    try:
        n_frames = int(meta["frames"])
        fps = float(meta["fps"])
    except KeyError as e:
        raise ValueError(f"{meta_path}: missing key {e.args[0]!r}") from None
    beams = int(meta.get("beams", N_BEAMS))
    samples = int(meta.get("samples", N_SAMPLES))
    if (beams, samples) != (N_BEAMS, N_SAMPLES):
        raise ValueError(f"{meta_path}: unsupported geometry {beams}x{samples}")
    data = path.read_bytes()
    if len(data) % FRAME_BYTES:
        raise ValueError(f"{path}: size {len(data)} is not a multiple of {FRAME_BYTES} bytes")
    if len(data) // FRAME_BYTES != n_frames:
        raise ValueError(f"{path}: holds {len(data) // FRAME_BYTES} frames, metadata says {n_frames}")
    frames = np.frombuffer(data, dtype=np.uint8).reshape(n_frames, N_BEAMS, N_SAMPLES).copy()
    return frames, fps


def load_sequence(path) -> FrameSequence:
    """Load a ``.ult`` file and preprocess every frame to 64x128 in [0, 1]."""
    raw, fps = load_ult(path)
    return FrameSequence(resize_bicubic(raw), fps)
