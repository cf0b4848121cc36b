"""Distance-preserving flag error correction with lookup-table decoders."""

from .codes import CssCode, build_hex_color_code
from .faultcode import CnotOrdering, FaultCheckMatrix, build_fault_check_matrix
from .gf2core import BitMatrix, BitVector
from .lookup import FullSyndrome, LookupTable, MimSearcher, build_cache, verify_distinguishability

__version__ = "0.1.0"

__all__ = [
    "BitMatrix",
    "BitVector",
    "CnotOrdering",
    "CssCode",
    "FaultCheckMatrix",
    "FullSyndrome",
    "LookupTable",
    "MimSearcher",
    "build_cache",
    "build_fault_check_matrix",
    "build_hex_color_code",
    "verify_distinguishability",
]
