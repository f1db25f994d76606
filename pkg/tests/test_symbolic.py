import itertools
import unicodedata

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from canarykit.symbolic import (
    CYRILLIC_TO_LATIN,
    HG,
    HOMOGLYPH_PAIRS,
    LATIN_TO_CYRILLIC,
    WS,
    WS_ALPHABET,
    ZW,
    ZW_ALPHABET,
    from_base4,
    to_base4,
)

CODECS = {"WS": WS, "ZW": ZW, "HG": HG}

# cover alphabet: ordinary prose characters plus a sprinkling of every surface
COVER_CHARS = (
    list("abcdeopxyBHKMTACEOPX hijklmnqrstuvwz.,;'\"!?0123456789")
    + [" "] * 12
    + ["\n"] * 2
    + list(WS_ALPHABET)
    + list(ZW_ALPHABET)
    + ["\u0430", "\u0412"]
)
covers = st.text(alphabet=st.sampled_from(COVER_CHARS), min_size=0, max_size=400)
long_covers = st.text(alphabet=st.sampled_from(COVER_CHARS), min_size=250, max_size=600)


# --- alphabets and maps -------------------------------------------------------


def test_alphabets_are_disjoint_and_well_formed():
    assert all(unicodedata.category(c) == "Zs" for c in WS_ALPHABET)
    assert all(unicodedata.category(c) == "Cf" for c in ZW_ALPHABET)
    hg = set(LATIN_TO_CYRILLIC) | set(CYRILLIC_TO_LATIN)
    assert not (set(WS_ALPHABET) & set(ZW_ALPHABET) or set(WS_ALPHABET) & hg or set(ZW_ALPHABET) & hg)


def test_homoglyph_map_is_a_bijection_of_18_pairs():
    assert len(HOMOGLYPH_PAIRS) == 18
    assert len(LATIN_TO_CYRILLIC) == len(CYRILLIC_TO_LATIN) == 18
    for lat, cyr in HOMOGLYPH_PAIRS:
        assert lat.isascii()
        assert "CYRILLIC" in unicodedata.name(cyr)
        # the look-alike shares the Latin letter's case
        assert lat.isupper() == cyr.isupper()


def test_base4_digits_lsb_first():
    assert to_base4(b"\xab") == [3, 2, 2, 2]
    assert from_base4([3, 2, 2, 2]) == b"\xab"


# --- WS ----------------------------------------------------------------------


def test_ws_encode_hand_computed():
    text = " ".join("w" * 13)  # 12 spaces
    out = WS.encode(text, b"\xab")
    got = [c for c in out if c in WS_ALPHABET]
    # frame 00 01 ab -> digits 0000 1000 3222
    a, b, c, d = WS_ALPHABET
    assert got == [a, a, a, a, b, a, a, a, d, c, c, c]
    assert WS.decode(out) == b"\xab"


def test_ws_capacity_boundary():
    assert WS.encode(" ".join("w" * 12), b"\xab") is None  # 11 spaces
    assert WS.capacity(" " * 11) == 0
    assert WS.capacity("") == 0
    assert WS.capacity(" " * 100) == 23


def test_ws_decode_plain_and_truncated():
    assert WS.decode("plain ascii text") is None
    enc = WS.encode(" ".join("w" * 40), b"hello")
    digits = [i for i, c in enumerate(enc) if c in WS_ALPHABET]
    truncated = enc[: digits[-5]]
    assert WS.decode(truncated) is None


# --- ZW ----------------------------------------------------------------------


def test_zw_stride_with_exact_gaps():
    text = "abcdefghijklm"  # 13 visible -> 12 gaps
    assert ZW.gap_indices(12, 12) == list(range(12))
    out = ZW.encode(text, b"\x01")
    a, b, _, _ = ZW_ALPHABET
    digits = [a] * 4 + [b, a, a, a] + [b, a, a, a]
    expected = "a" + "".join(z + ch for z, ch in zip(digits, text[1:]))
    assert out == expected


def test_zw_stride_spreads_digits():
    assert ZW.gap_indices(4, 10) == [0, 2, 5, 7]


def test_zw_gaps_skip_newlines():
    text = "ab\n\ncd"
    assert ZW.eligible(text) == [1, 4, 5]


def test_zw_capacity_examples():
    assert ZW.capacity("x" * 101) == 23
    assert ZW.capacity("x" * 9) == 0
    assert ZW.capacity("") == 0


def test_zw_decode_absent_and_truncated():
    assert ZW.decode("nothing here") is None
    enc = ZW.encode("x" * 200, b"payload")
    zs = [i for i, c in enumerate(enc) if c in ZW_ALPHABET]
    assert ZW.decode(enc[: zs[-3]]) is None


# --- HG ----------------------------------------------------------------------


def test_hg_encode_hand_computed():
    text = "aaaa " * 10  # 40 eligible
    out = HG.encode(text, b"\xff")
    letters = [c for c in out if c != " "]
    # frame bits: 00000000 00000001 11111111 -> 1-indexed positions 16..24 flip
    flipped = [i + 1 for i, c in enumerate(letters) if c == "\u0430"]
    assert flipped == list(range(16, 25))


def test_hg_capacity_examples():
    assert HG.capacity("a" * 80) == 8
    assert HG.capacity("a" * 15) == 0
    assert HG.capacity("a" * 24) == 1


def test_hg_boundary():
    p = b"xy"
    need = 8 * (2 + len(p))
    assert HG.encode("a" * (need - 1), p) is None
    assert HG.decode(HG.encode("a" * need, p)) == p


def test_hg_normalizes_cyrillic_before_encoding():
    cover = "p\u0430ssword c\u043ede " * 10
    out = HG.encode(cover, b"k")
    assert HG.decode(out) == b"k"
    assert HG.strip_encoding(out) == HG.strip_encoding(cover)


def test_hg_decode_without_cyrillic():
    assert HG.decode("a plain latin sentence about cats") is None


# --- shared properties --------------------------------------------------------


@pytest.mark.parametrize("name", ["WS", "ZW", "HG"])
@settings(max_examples=150, deadline=None)
@given(cover=long_covers, data=st.data())
def test_roundtrip_and_strip(name, cover, data):
    codec = CODECS[name]
    cap = codec.capacity(cover)
    assume(cap >= 1)
    payload = data.draw(st.binary(min_size=1, max_size=cap))
    enc = codec.encode(cover, payload)
    assert enc is not None
    assert codec.decode(enc) == payload
    assert codec.strip_encoding(enc) == codec.strip_encoding(cover)


@pytest.mark.parametrize("name", ["WS", "ZW", "HG"])
@given(cover=covers)
def test_strip_idempotent(name, cover):
    codec = CODECS[name]
    once = codec.strip_encoding(cover)
    assert codec.strip_encoding(once) == once


@pytest.mark.parametrize("name", ["WS", "ZW", "HG"])
@settings(deadline=None)
@given(cover=covers, extra=st.integers(0, 40))
def test_capacity_monotone_under_eligible_extension(name, cover, extra):
    codec = CODECS[name]
    pad = {"WS": " ", "ZW": "x", "HG": "a"}[name]
    assert codec.capacity(cover + pad * extra) >= codec.capacity(cover)


@pytest.mark.parametrize("name", ["WS", "ZW", "HG"])
@settings(deadline=None)
@given(cover=covers)
def test_capacity_is_largest_encodable_payload(name, cover):
    codec = CODECS[name]
    cap = codec.capacity(cover)
    if cap:
        assert codec.encode(cover, bytes(cap)) is not None
    assert codec.encode(cover, bytes(cap + 1)) is None


@settings(max_examples=60, deadline=None)
@given(cover=st.text(alphabet=st.sampled_from(list("aceopxy BHKT\nqrs")), min_size=300, max_size=600),
       payload=st.binary(min_size=1, max_size=6))
def test_encode_order_does_not_matter(cover, payload):
    assume(all(c.capacity(cover) >= len(payload) for c in CODECS.values()))
    for order in itertools.permutations(CODECS):
        text = cover
        for name in order:
            text = CODECS[name].encode(text, payload)
        for codec in CODECS.values():
            assert codec.decode(text) == payload
