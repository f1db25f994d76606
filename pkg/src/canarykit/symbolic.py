"""Character-level codecs on three disjoint Unicode surfaces.

``WS``  substitutes ASCII spaces with one of four Unicode space variants
        (base 4, head-first, two bits per space).
``ZW``  inserts one of four zero-width format characters into the gaps
        between visible characters (base 4, stride-interleaved).
``HG``  swaps Latin letters for their Cyrillic look-alikes (one bit per
        eligible letter, head-first).

Each codec frames the payload itself, so ``decode(encode(t, p)) == p``.
Encoders return ``None`` when the cover is too small, and decoders return
``None`` when no well-formed frame is present.
"""

from __future__ import annotations

from .tokens import frame, try_unframe

WS_ALPHABET = ("\u2008", "\u2009", "\u202f", "\u205f")
ZW_ALPHABET = ("\u200b", "\u200c", "\u200d", "\ufeff")

HOMOGLYPH_PAIRS = (
    # lowercase
    ("a", "\u0430"), ("c", "\u0441"), ("e", "\u0435"), ("o", "\u043e"),
    ("p", "\u0440"), ("x", "\u0445"), ("y", "\u0443"),
    # uppercase
    ("A", "\u0410"), ("B", "\u0412"), ("C", "\u0421"), ("E", "\u0415"),
    ("H", "\u041d"), ("K", "\u041a"), ("M", "\u041c"), ("O", "\u041e"),
    ("P", "\u0420"), ("T", "\u0422"), ("X", "\u0425"),
)
LATIN_TO_CYRILLIC = dict(HOMOGLYPH_PAIRS)
CYRILLIC_TO_LATIN = {cyr: lat for lat, cyr in HOMOGLYPH_PAIRS}

NEWLINES = frozenset("\n\r")

_WS_INDEX = {c: i for i, c in enumerate(WS_ALPHABET)}
_ZW_INDEX = {c: i for i, c in enumerate(ZW_ALPHABET)}
_WS_STRIP = str.maketrans({c: " " for c in WS_ALPHABET})
_ZW_STRIP = str.maketrans({c: None for c in ZW_ALPHABET})
_HG_STRIP = str.maketrans(CYRILLIC_TO_LATIN)


# --- digit streams ----------------------------------------------------------


def to_base4(data: bytes) -> list[int]:
    """Four base-4 digits per byte, least significant digit first."""
    return [(b >> shift) & 3 for b in data for shift in (0, 2, 4, 6)]


def from_base4(digits: list[int]) -> bytes:
    n = len(digits) // 4
    return bytes(
        digits[4 * i] | digits[4 * i + 1] << 2 | digits[4 * i + 2] << 4 | digits[4 * i + 3] << 6
        for i in range(n)
    )


def to_bits(data: bytes) -> list[int]:
    """Eight bits per byte, most significant bit first."""
    return [(b >> shift) & 1 for b in data for shift in range(7, -1, -1)]


def from_bits(bits: list[int]) -> bytes:
    out = bytearray()
    for i in range(0, len(bits) - 7, 8):
        v = 0
        for bit in bits[i : i + 8]:
            v = (v << 1) | bit
        out.append(v)
    return bytes(out)


# --- codecs -----------------------------------------------------------------


class Codec:
    """Uniform layer interface shared by every embedding method."""

    name = "?"

    def encode(self, text: str, payload: bytes) -> str | None:
        raise NotImplementedError

    def decode(self, text: str) -> bytes | None:
        raise NotImplementedError

    def strip_encoding(self, text: str) -> str:
        raise NotImplementedError

    def capacity(self, text: str) -> int:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class WhitespaceCodec(Codec):
    name = "WS"
    alphabet = WS_ALPHABET

    def strip_encoding(self, text: str) -> str:
        return text.translate(_WS_STRIP)

    def eligible(self, text: str) -> list[int]:
        return [i for i, c in enumerate(text) if c == " "]

    def capacity(self, text: str) -> int:
        return max(0, self.strip_encoding(text).count(" ") // 4 - 2)

    def encode(self, text: str, payload: bytes) -> str | None:
        cover = self.strip_encoding(text)
        digits = to_base4(frame(payload))
        positions = self.eligible(cover)
        if len(positions) < len(digits):
            return None
        chars = list(cover)
        for pos, d in zip(positions, digits):
            chars[pos] = WS_ALPHABET[d]
        return "".join(chars)

    def decode(self, text: str) -> bytes | None:
        digits = [_WS_INDEX[c] for c in text if c in _WS_INDEX]
        if not digits:
            return None
        return try_unframe(from_base4(digits))


class ZeroWidthCodec(Codec):
    """Gaps sit immediately before every visible (non-newline) character
    except the first, so a text with ``N`` visible characters has ``N - 1``
    gaps. A gap that follows a line break lands after the break."""

    name = "ZW"
    alphabet = ZW_ALPHABET

    def strip_encoding(self, text: str) -> str:
        return text.translate(_ZW_STRIP)

    def eligible(self, text: str) -> list[int]:
        visible = [i for i, c in enumerate(text) if c not in NEWLINES]
        return visible[1:]

    def capacity(self, text: str) -> int:
        n_visible = sum(1 for c in self.strip_encoding(text) if c not in NEWLINES)
        return max(0, (n_visible - 1) // 4 - 2)

    @staticmethod
    def gap_indices(n: int, m: int) -> list[int]:
        """Stride interleaving: digit ``i`` goes to gap ``i * m // n``."""
        return [i * m // n for i in range(n)]

    def encode(self, text: str, payload: bytes) -> str | None:
        cover = self.strip_encoding(text)
        digits = to_base4(frame(payload))
        gaps = self.eligible(cover)
        n, m = len(digits), len(gaps)
        if m < n:
            return None
        inserts = {gaps[g]: ZW_ALPHABET[d] for g, d in zip(self.gap_indices(n, m), digits)}
        return "".join(inserts.get(i, "") + c for i, c in enumerate(cover))

    def decode(self, text: str) -> bytes | None:
        digits = [_ZW_INDEX[c] for c in text if c in _ZW_INDEX]
        if not digits:
            return None
        return try_unframe(from_base4(digits))


class HomoglyphCodec(Codec):
    name = "HG"
    pairs = HOMOGLYPH_PAIRS

    def strip_encoding(self, text: str) -> str:
        return text.translate(_HG_STRIP)

    def capacity(self, text: str) -> int:
        n = sum(1 for c in text if c in LATIN_TO_CYRILLIC or c in CYRILLIC_TO_LATIN)
        return max(0, n // 8 - 2)

    def encode(self, text: str, payload: bytes) -> str | None:
        cover = self.strip_encoding(text)
        bits = to_bits(frame(payload))
        chars = list(cover)
        k = 0
        for i, c in enumerate(chars):
            if k == len(bits):
                break
            if c in LATIN_TO_CYRILLIC:
                if bits[k]:
                    chars[i] = LATIN_TO_CYRILLIC[c]
                k += 1
        if k < len(bits):
            return None
        return "".join(chars)

    def decode(self, text: str) -> bytes | None:
        bits = []
        seen_cyrillic = False
        for c in text:
            if c in LATIN_TO_CYRILLIC:
                bits.append(0)
            elif c in CYRILLIC_TO_LATIN:
                bits.append(1)
                seen_cyrillic = True
        if not seen_cyrillic:
            # an all-zero stream declares a zero-length frame
            return None
        return try_unframe(from_bits(bits))


WS = WhitespaceCodec()
ZW = ZeroWidthCodec()
HG = HomoglyphCodec()

SYMBOLIC_CODECS = {"WS": WS, "ZW": ZW, "HG": HG}

ws_encode, ws_decode, ws_strip, ws_capacity = WS.encode, WS.decode, WS.strip_encoding, WS.capacity
zw_encode, zw_decode, zw_strip, zw_capacity = ZW.encode, ZW.decode, ZW.strip_encoding, ZW.capacity
hg_encode, hg_decode, hg_strip, hg_capacity = HG.encode, HG.decode, HG.strip_encoding, HG.capacity
