"""Color-block code toolkit: encode, render, locate, classify, decode."""

from .codec import (
    ALPHABET,
    SEQUENCE_LENGTH,
    CodeLayout,
    CodeMatrix,
    DataSymbol,
    DEFAULT_LAYOUT,
    OutOfRangeError,
    SymbolSequence,
    build_matrix,
    capacity,
    crc8,
    payload_to_symbols,
    symbols_to_payload,
)
from .raster import OutOfBoundsError, RasterImage, RenderSpec, embed, render
from .pipeline import (
    CrcFailureError,
    DecodeError,
    DecodeOptions,
    DecodeReport,
    DecodeTimeoutError,
    NotFoundError,
    decode,
    decode_file,
    encode,
)

__version__ = "0.1.0"

__all__ = [
    "ALPHABET",
    "SEQUENCE_LENGTH",
    "CodeLayout",
    "CodeMatrix",
    "DataSymbol",
    "DEFAULT_LAYOUT",
    "OutOfRangeError",
    "SymbolSequence",
    "build_matrix",
    "capacity",
    "crc8",
    "payload_to_symbols",
    "symbols_to_payload",
    "OutOfBoundsError",
    "RasterImage",
    "RenderSpec",
    "embed",
    "render",
    "CrcFailureError",
    "DecodeError",
    "DecodeOptions",
    "DecodeReport",
    "DecodeTimeoutError",
    "NotFoundError",
    "decode",
    "decode_file",
    "encode",
    "__version__",
]
