"""MGC-LSP vocoder: LSP conversion, MGLSA filtering and excitation."""

from .config import VocoderConfig
from .excitation import frame_boundaries, make_excitation
from .fileio import read_f0, read_params, read_wav, write_f0, write_params, write_wav
from .lsp import InstabilityError, check_lsp, coeff_to_lsp, lsp_to_coeff, repair_lsp
from .mgc import b2mc, frame_filter_coefficients, gnorm, ignorm, mc2b, mglsa_response
from .mglsa import MglsaFilter, interpolate_frames, mglsa_synthesize

__all__ = [
    "VocoderConfig", "frame_boundaries", "make_excitation", "read_f0", "read_params",
    "read_wav", "write_f0", "write_params", "write_wav", "InstabilityError", "check_lsp",
    "coeff_to_lsp", "lsp_to_coeff", "repair_lsp", "b2mc", "frame_filter_coefficients",
    "gnorm", "ignorm", "mc2b", "mglsa_response", "MglsaFilter", "interpolate_frames",
    "mglsa_synthesize",
]
