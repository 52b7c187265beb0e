from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class VocoderConfig:
    """Synthesis constants. ``gamma`` must be ``-1/stage`` for an integer stage >= 1."""

    alpha: float = 0.42
    gamma: float = -1.0 / 3.0
    order: int = 24
    sample_rate: int = 22050
    fps: float = 82.0

    def __post_init__(self):
        if not abs(self.alpha) < 1:
            raise ValueError(f"|alpha| must be < 1, got {self.alpha}")
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.sample_rate <= 0 or not self.fps > 0:
            raise ValueError("sample_rate and fps must be positive")
        self.stage  # validates gamma

    @property
    def stage(self) -> int:
        if self.gamma >= 0:
            raise ValueError(f"gamma must be -1/stage with stage >= 1, got {self.gamma}")
        stage = round(-1.0 / self.gamma)
        if stage < 1 or abs(-1.0 / stage - self.gamma) > 1e-9:
            raise ValueError(f"gamma must be -1/stage with stage >= 1, got {self.gamma}")
        return stage

    @property
    def dim(self) -> int:
        """Parameter vector length: gain plus ``order`` LSP frequencies."""
        return self.order + 1

    @property
    def frame_shift(self) -> float:
        """Samples per parameter frame (fractional)."""
        return self.sample_rate / self.fps
