"""Generated cover text that carries a framed payload in its word choices.

A small order-2 word model with add-one smoothing supplies a ranked,
integer-weighted next-word distribution. An arithmetic coder with 64-bit
bounds walks that distribution: the framed payload (zero padded) is read as
a binary fraction and, at every step, the word whose sub-interval contains
it is emitted. Decoding replays the same model over the observed words.

All arithmetic is on Python integers, so identical model bytes give
identical covers on every platform.
"""

from __future__ import annotations

import hashlib
import re
import string
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable

from .symbolic import hg_strip, zw_strip
from .tokens import HMAC_TOKEN_LEN, InvalidArgument, frame

FORMAT_VERSION = "canarykit-refmodel 1"
VOCAB_LIMIT = 4096
MIN_CORPUS_WORDS = 10_000
CONTEXT_ORDER = 2
UNKNOWN = -1

PRECISION = 64
FULL = 1 << PRECISION
MASK = FULL - 1

DEFAULT_CONTEXT = "the story of"
DEFAULT_TOP_K = 16

_ALLOWED = re.compile(r"^[a-z0-9.]+$")
_EDGE_PUNCT = "".join(c for c in string.punctuation if c != ".")
_WS_RUN = re.compile(r"\s+")


# --- model ------------------------------------------------------------------


def corpus_words(text: str) -> list[str]:
    """Lowercased words restricted to ``[a-z0-9.]``.

    Leading and trailing punctuation (other than ``.``) is peeled off; a word
    that still holds anything outside the allowed set is dropped.
    """
    out = []
    for raw in text.split():
        w = raw.lower().strip(_EDGE_PUNCT)
        if w and _ALLOWED.match(w):
            out.append(w)
    return out


@dataclass(frozen=True)
class RefModel:
    vocabulary: tuple[str, ...]
    # (prev2, prev1) -> ((next, count), ...) sorted by count desc, then id
    counts: dict[tuple[int, int], tuple[tuple[int, int], ...]]
    context_order: int = CONTEXT_ORDER
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.vocabulary)})

    def context_ids(self, words: Iterable[str]) -> tuple[int, int]:
        ids = [self.index.get(w, UNKNOWN) for w in words][-2:]
        while len(ids) < 2:
            ids.insert(0, UNKNOWN)
        return ids[0], ids[1]

    def top(self, ctx: tuple[int, int], k: int) -> list[tuple[int, int]]:
        """The ``k`` highest-ranked ``(token_id, weight)`` pairs for *ctx*.

        Seen continuations weigh ``count + 1`` and come first; unseen words
        weigh 1 and follow in vocabulary order.
        """
        seen = self.counts.get(ctx, ())
        out = [(t, c + 1) for t, c in seen[:k]]
        if len(out) < k:
            taken = {t for t, _ in seen}
            for t in range(len(self.vocabulary)):
                if t not in taken:
                    out.append((t, 1))
                    if len(out) == k:
                        break
        return out

    # serialization

    def dumps(self) -> str:
        lines = [FORMAT_VERSION, f"vocab {len(self.vocabulary)}", *self.vocabulary]
        rows = [
            f"{a} {b} {t} {c}"
            for (a, b), nexts in sorted(self.counts.items())
            for t, c in nexts
        ]
        lines += [f"counts {len(rows)}", *rows]
        body = "\n".join(lines) + "\n"
        return body + "sha256 " + hashlib.sha256(body.encode("ascii")).hexdigest() + "\n"

    @classmethod
    def loads(cls, data: str) -> "RefModel":
        body, sep, tail = data.rpartition("sha256 ")
        if not sep or hashlib.sha256(body.encode("ascii")).hexdigest() != tail.strip():
            raise InvalidArgument("model content hash mismatch")
        lines = body.splitlines()
        if not lines or lines[0] != FORMAT_VERSION:
            raise InvalidArgument(f"unsupported model format {lines[0] if lines else ''!r}")
        n_vocab = int(lines[1].split()[1])
        vocab = tuple(lines[2 : 2 + n_vocab])
        pos = 2 + n_vocab
        n_rows = int(lines[pos].split()[1])
        table: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for row in lines[pos + 1 : pos + 1 + n_rows]:
            a, b, t, c = map(int, row.split())
            table.setdefault((a, b), []).append((t, c))
        return cls(vocab, {k: tuple(v) for k, v in table.items()})

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("ascii")).hexdigest()


def build_ref_model(corpus: str, vocab_limit: int = VOCAB_LIMIT) -> RefModel:
    words = corpus_words(corpus)
    if len(corpus.split()) < MIN_CORPUS_WORDS:
        raise InvalidArgument(f"corpus needs at least {MIN_CORPUS_WORDS} words")
    freq = Counter(words)
    vocab = tuple(sorted(freq, key=lambda w: (-freq[w], w))[:vocab_limit])
    index = {w: i for i, w in enumerate(vocab)}
    ids = [index[w] for w in words if w in index]
    table: dict[tuple[int, int], Counter] = {}
    for a, b, c in zip(ids, ids[1:], ids[2:]):
        table.setdefault((a, b), Counter())[c] += 1
    counts = {
        ctx: tuple(sorted(ctr.items(), key=lambda tc: (-tc[1], tc[0])))
        for ctx, ctr in table.items()
    }
    return RefModel(vocab, counts)


def embedded_corpus() -> str:
    root = resources.files("canarykit") / "data" / "corpus"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".txt"))
    return "\n\n".join((root / n).read_text(encoding="utf-8") for n in names)


@lru_cache(maxsize=1)
def default_model() -> RefModel:
    return build_ref_model(embedded_corpus())


# --- parameters -------------------------------------------------------------


def default_pad(frame_len: int) -> int:
    """Twice the frame for short (HMAC) frames, 1.3x rounded up otherwise."""
    if frame_len <= 2 + HMAC_TOKEN_LEN:
        return 2 * frame_len
    return (13 * frame_len + 9) // 10


@dataclass(frozen=True)
class LmParams:
    context_string: str = DEFAULT_CONTEXT
    max_tokens: int = 2000
    min_cover_chars: int = 0
    pad_to_bytes: int | None = None  # None: derived from the frame length
    truncation_min_k: int = 2
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if self.truncation_min_k < 2 or self.top_k < self.truncation_min_k:
            raise InvalidArgument("need 2 <= truncation_min_k <= top_k")

    def padded_len(self, frame_len: int) -> int:
        pad = default_pad(frame_len) if self.pad_to_bytes is None else self.pad_to_bytes
        return max(pad, frame_len)

    def with_(self, **kw) -> "LmParams":
        return replace(self, **kw)


# --- coder core -------------------------------------------------------------


def canonicalize(text: str) -> str:
    return _WS_RUN.sub(" ", hg_strip(zw_strip(text))).strip()


def _partition(model: RefModel, ctx, low: int, high: int, params: LmParams):
    """Kept candidates and their integer sub-interval widths for [low, high)."""
    rng = high - low
    cands = model.top(ctx, min(params.top_k, len(model.vocabulary), rng))
    k = len(cands)
    total = sum(w for _, w in cands)
    # shrink K until the smallest kept word would get a whole unit on its own
    while k > params.truncation_min_k and cands[k - 1][1] * rng < total:
        k -= 1
        total -= cands[k][1]
    cands = cands[:k]
    spare = rng - k
    widths = [1 + w * spare // total for _, w in cands]
    widths[0] += rng - sum(widths)
    return cands, widths


def _renormalize(low: int, high: int) -> tuple[int, int, int]:
    """Shift out the leading bits shared by every value in [low, high)."""
    shift = PRECISION - (low ^ (high - 1)).bit_length()
    if shift == 0:
        return low, high, 0
    if shift == PRECISION:
        return 0, FULL, shift
    low = (low << shift) & MASK
    high = (((high - 1) << shift) & MASK | ((1 << shift) - 1)) + 1
    return low, high, shift


def _bits_of(data: bytes) -> list[int]:
    return [(b >> s) & 1 for b in data for s in range(7, -1, -1)]


def _window(bits: list[int], pos: int) -> int:
    v = 0
    for i in range(pos, pos + PRECISION):
        v = (v << 1) | (bits[i] if i < len(bits) else 0)
    return v


def lm_encode(
    payload: bytes,
    model: RefModel | None = None,
    params: LmParams | None = None,
    trace: list | None = None,
) -> str | None:
    model = model or default_model()
    params = params or LmParams()
    framed = frame(payload)
    message = framed + bytes(params.padded_len(len(framed)) - len(framed))
    bits = _bits_of(message)
    n_bits = len(bits)

    history = corpus_words(params.context_string)
    low, high, cursor = 0, FULL, 0
    out: list[str] = []
    cover_len = -1
    while cursor < n_bits or cover_len < params.min_cover_chars:
        if len(out) >= params.max_tokens:
            return None
        ctx = model.context_ids(history)
        cands, widths = _partition(model, ctx, low, high, params)
        value = _window(bits, cursor)
        lo = low
        for (tok, _), w in zip(cands, widths):
            if value < lo + w:
                break
            lo += w
        low, high = lo, lo + w
        low, high, shift = _renormalize(low, high)
        cursor += shift
        word = model.vocabulary[tok]
        out.append(word)
        history.append(word)
        cover_len += len(word) + 1
        if trace is not None:
            trace.append((tok, low, high, cursor))
    return " ".join(out)


def _replay(model: RefModel, words: list[str], params: LmParams, trace, lenient: bool):
    history = corpus_words(params.context_string)
    low, high = 0, FULL
    shifted: list[int] = []
    for word in words:
        ctx = model.context_ids(history)
        cands, widths = _partition(model, ctx, low, high, params)
        tok = model.index.get(word, UNKNOWN)
        rank = next((i for i, (t, _) in enumerate(cands) if t == tok), None)
        if rank is None:
            if not lenient:
                return None
            rank = int.from_bytes(hashlib.sha256(word.encode()).digest()[:8], "big") % len(cands)
        lo = low + sum(widths[:rank])
        low, high = lo, lo + widths[rank]
        new_low, high, shift = _renormalize(low, high)
        if shift:
            shifted.extend((low >> (PRECISION - 1 - i)) & 1 for i in range(shift))
        low = new_low
        history.append(word)
        if trace is not None:
            trace.append((tok, low, high, len(shifted)))
    return shifted, low


def _pack(bits: list[int]) -> bytes:
    return bytes(
        int("".join(map(str, bits[i : i + 8])), 2) for i in range(0, len(bits) - 7, 8)
    )


def lm_decode(
    text: str,
    model: RefModel | None = None,
    params: LmParams | None = None,
    trace: list | None = None,
) -> bytes | None:
    """Recover the payload from a generated cover, or ``None``.

    Every observed word must sit inside the truncated distribution, and the
    whole word stream must be the one the encoder would produce for the
    recovered frame followed by zero padding. A single inserted, deleted or
    substituted word therefore invalidates the result.
    """
    model = model or default_model()
    params = params or LmParams()
    words = canonicalize(text).split()
    if not words:
        return None
    replay = _replay(model, words, params, trace, lenient=False)
    if replay is None:
        return None
    bits, final_low = replay
    if len(bits) < 16:
        return None
    n = int("".join(map(str, bits[:16])), 2)
    frame_bits = 16 + 8 * n
    if n == 0 or len(bits) < frame_bits:
        return None
    if len(bits) < 8 * params.padded_len(2 + n):
        return None
    # everything after the frame must be the zero padding, and the final
    # interval must still contain the (all-zero) remainder of the message
    if any(bits[frame_bits:]) or final_low != 0:
        return None
    return _pack(bits[16:frame_bits])


def lm_extract_candidate(
    text: str, model: RefModel | None = None, params: LmParams | None = None
) -> bytes | None:
    """Best-effort bytes from arbitrary prose, for false-positive studies.

    Unknown words are mapped onto a pseudo-random rank instead of aborting,
    and the declared-length slice is returned whether or not it is complete.
    """
    model = model or default_model()
    params = params or LmParams()
    words = canonicalize(text).split()
    if not words:
        return None
    bits, _ = _replay(model, words, params, None, lenient=True)
    raw = _pack(bits)
    if len(raw) < 2:
        return None
    n = int.from_bytes(raw[:2], "big")
    return raw[2 : 2 + n]
