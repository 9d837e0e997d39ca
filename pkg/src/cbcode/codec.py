"""Logical layer of the color-block code.

A code is a 4x4 grid of colored blocks.  Three corners carry pure red,
green and blue positioning blocks (counterclockwise order), the fourth
corner carries a gray verification block whose value is the CRC-8 of the
packed data, and the remaining twelve blocks carry data drawn from a
six-level gray alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "DataSymbol",
    "SymbolSequence",
    "CodeLayout",
    "CodeMatrix",
    "OutOfRangeError",
    "ALPHABET",
    "SEQUENCE_LENGTH",
    "RED",
    "GREEN",
    "BLUE",
    "DEFAULT_LAYOUT",
    "capacity",
    "symbol_from_letter",
    "symbol_from_nibble",
    "symbol_from_gray",
    "payload_to_symbols",
    "symbols_to_payload",
    "pack",
    "crc8",
    "crc_verify",
    "crc_remainder_zero",
    "build_matrix",
    "matrix_to_sequence",
]

RED = (0xFF, 0x00, 0x00)
GREEN = (0x00, 0xFF, 0x00)
BLUE = (0x00, 0x00, 0xFF)

SEQUENCE_LENGTH = 12

_LETTERS = "0369CF"
_NIBBLES = (0x0, 0x3, 0x6, 0x9, 0xC, 0xF)


class OutOfRangeError(ValueError):
    """Payload value outside the representable range."""


@dataclass(frozen=True)
class DataSymbol:
    """One of the six data values, named by the hex letter of its nibble.

    The block color is the gray level obtained by doubling the nibble's
    hex digit: letter '9' -> nibble 0x9 -> gray 0x99 -> RGB (153, 153, 153).
    """

    letter: str
    nibble: int

    @property
    def gray(self) -> int:
        return self.nibble * 0x11

    @property
    def rgb(self) -> tuple[int, int, int]:
        g = self.gray
        return (g, g, g)

    def __str__(self) -> str:
        return self.letter


ALPHABET: tuple[DataSymbol, ...] = tuple(
    DataSymbol(letter, nibble) for letter, nibble in zip(_LETTERS, _NIBBLES)
)

_BY_LETTER = {s.letter: s for s in ALPHABET}
_BY_NIBBLE = {s.nibble: s for s in ALPHABET}
_BY_GRAY = {s.gray: s for s in ALPHABET}


def symbol_from_letter(letter: str) -> DataSymbol:
    try:
        return _BY_LETTER[letter.upper()]
    except KeyError:
        raise ValueError(f"not a data letter: {letter!r}") from None


def symbol_from_nibble(nibble: int) -> DataSymbol:
    try:
        return _BY_NIBBLE[nibble]
    except KeyError:
        raise ValueError(f"not a data nibble: {nibble:#x}") from None


def symbol_from_gray(gray: int) -> DataSymbol:
    try:
        return _BY_GRAY[gray]
    except KeyError:
        raise ValueError(f"not a standard data gray: {gray:#x}") from None


@dataclass(frozen=True)
class SymbolSequence:
    """Ordered run of twelve data symbols."""

    symbols: tuple[DataSymbol, ...]

    def __post_init__(self):
        if len(self.symbols) != SEQUENCE_LENGTH:
            raise ValueError(
                f"expected {SEQUENCE_LENGTH} symbols, got {len(self.symbols)}"
            )
        for s in self.symbols:
            if s not in ALPHABET:
                raise ValueError(f"not an alphabet symbol: {s!r}")

    @classmethod
    def from_string(cls, text: str) -> "SymbolSequence":
        return cls(tuple(symbol_from_letter(ch) for ch in text))

    @classmethod
    def from_nibbles(cls, nibbles) -> "SymbolSequence":
        return cls(tuple(symbol_from_nibble(n) for n in nibbles))

    def __str__(self) -> str:
        return "".join(s.letter for s in self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, i):
        return self.symbols[i]


def capacity(alphabet_size: int = len(ALPHABET), data_blocks: int = SEQUENCE_LENGTH) -> int:
    """Number of distinct payloads a code can carry."""
    return alphabet_size ** data_blocks


def payload_to_symbols(value: int) -> SymbolSequence:
    """Encode an integer as twelve symbols, base-6 most-significant first."""
    if not 0 <= value < capacity():
        raise OutOfRangeError(
            f"payload {value} outside [0, {capacity()})"
        )
    digits = []
    v = value
    for _ in range(SEQUENCE_LENGTH):
        v, d = divmod(v, len(ALPHABET))
        digits.append(d)
    digits.reverse()
    return SymbolSequence(tuple(ALPHABET[d] for d in digits))


def symbols_to_payload(seq: SymbolSequence) -> int:
    """Inverse of payload_to_symbols."""
    value = 0
    for sym in seq:
        value = value * len(ALPHABET) + ALPHABET.index(sym)
    return value


def pack(seq: SymbolSequence) -> bytes:
    """Pack twelve nibbles into six bytes, earlier symbol in the high nibble."""
    out = bytearray(SEQUENCE_LENGTH // 2)
    for i, sym in enumerate(seq):
        if i % 2 == 0:
            out[i // 2] |= sym.nibble << 4
        else:
            out[i // 2] |= sym.nibble
    return bytes(out)


# CRC-8 with generator polynomial x^8 + x^2 + x + 1 (0x07), zero initial
# value, no reflection, no final XOR.  Table-driven; check("123456789") == 0xF4.
_CRC_POLY = 0x07


def _build_crc_table(poly: int) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            if crc & 0x80:
                crc = ((crc << 1) ^ poly) & 0xFF
            else:
                crc = (crc << 1) & 0xFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table(_CRC_POLY)


def crc8(message: bytes) -> int:
    """CRC-8 (poly 0x07, init 0x00) of a byte string."""
    crc = 0x00
    for byte in message:
        crc = _CRC_TABLE[crc ^ byte]
    return crc


def crc_verify(message: bytes, check: int) -> bool:
    """Accept iff recomputing the CRC over the message reproduces check."""
    return crc8(message) == (check & 0xFF)


def crc_remainder_zero(message: bytes, check: int) -> bool:
    """Accept iff message*x^8 + check divides by G(x) with remainder zero.

    Algebraically equivalent to crc_verify; kept as an independent
    bit-level long division so the two acceptance routes can cross-check
    each other.
    """
    bits = []
    for byte in message + bytes([check & 0xFF]):
        for k in range(7, -1, -1):
            bits.append((byte >> k) & 1)
    # G(x) = x^8 + x^2 + x + 1 -> 9-bit divisor 1_0000_0111
    divisor = (1, 0, 0, 0, 0, 0, 1, 1, 1)
    work = bits + [0] * 0
    for i in range(len(work) - 8):
        if work[i]:
            for j, d in enumerate(divisor):
                work[i + j] ^= d
    return not any(work[-8:])


@dataclass(frozen=True)
class CodeLayout:
    """Placement of the corner blocks and read order of the data blocks.

    Cells are numbered 1..16 row-major.  Positioning blocks sit on three
    corners in counterclockwise color order red -> green -> blue; the
    remaining corner is the verification block.
    """

    p_red_cell: int = 1
    p_green_cell: int = 13
    p_blue_cell: int = 16
    v_cell: int = 4
    data_order: tuple[int, ...] = (2, 3, 5, 6, 7, 8, 9, 10, 11, 12, 14, 15)

    def __post_init__(self):
        corners = {self.p_red_cell, self.p_green_cell, self.p_blue_cell, self.v_cell}
        if corners != {1, 4, 13, 16}:
            raise ValueError("positioning and verification blocks must occupy the four corners")
        expected_data = set(range(1, 17)) - corners
        if set(self.data_order) != expected_data or len(self.data_order) != SEQUENCE_LENGTH:
            raise ValueError("data_order must cover the twelve non-corner cells exactly once")

    def role_of(self, cell: int) -> str:
        if cell == self.p_red_cell:
            return "P_RED"
        if cell == self.p_green_cell:
            return "P_GREEN"
        if cell == self.p_blue_cell:
            return "P_BLUE"
        if cell == self.v_cell:
            return "V"
        return "DATA"

    @property
    def grid(self) -> tuple[str, ...]:
        """Role of every cell, 1..16 row-major."""
        return tuple(self.role_of(c) for c in range(1, 17))


DEFAULT_LAYOUT = CodeLayout()


@dataclass(frozen=True)
class CodeMatrix:
    """Fully determined code: layout, data symbols and verification byte."""

    layout: CodeLayout
    data: SymbolSequence
    crc: int

    def cell_color(self, cell: int) -> tuple[int, int, int]:
        role = self.layout.role_of(cell)
        if role == "P_RED":
            return RED
        if role == "P_GREEN":
            return GREEN
        if role == "P_BLUE":
            return BLUE
        if role == "V":
            return (self.crc, self.crc, self.crc)
        return self.data[self.layout.data_order.index(cell)].rgb

    @property
    def cell_colors(self) -> tuple[tuple[int, int, int], ...]:
        return tuple(self.cell_color(c) for c in range(1, 17))


def build_matrix(seq: SymbolSequence, layout: CodeLayout = DEFAULT_LAYOUT) -> CodeMatrix:
    """Assemble a code matrix: CRC-8 over the packed data fills the V block."""
    return CodeMatrix(layout=layout, data=seq, crc=crc8(pack(seq)))


def matrix_to_sequence(matrix: CodeMatrix) -> tuple[SymbolSequence, int]:
    """Recover (data symbols, verification byte) from a matrix."""
    return matrix.data, matrix.crc
