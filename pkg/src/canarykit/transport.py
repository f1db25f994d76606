"""Deterministic transport transforms T00-T12 and the composite chains.

Each transform is a pure ``str -> str`` function modelling something that
happens to text on its way to an ingestion point: clipboard handling,
editor reflow, sanitisation, or targeted stripping by an adversary.
"""

from __future__ import annotations

import os
import re
import shlex
import string
import subprocess
import unicodedata
from dataclasses import dataclass
from typing import Callable

from .symbolic import CYRILLIC_TO_LATIN, ZW_ALPHABET

WRAP_WIDTH = 80
PARAPHRASE_ENV = "CANARYKIT_PARAPHRASE_CMD"


class TransformUnavailable(RuntimeError):
    pass


def t00_identity(text: str) -> str:
    return text


def t01_copy_paste(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return text[1:] if text.startswith("\ufeff") else text


_PARA_SPLIT = re.compile(r"\n(?:[ \t]*\n)+")
_ASCII_WS = re.compile(r"[ \t\n\r\f\v]+")


def t02_reflow(text: str, width: int = WRAP_WIDTH) -> str:
    """Greedy re-wrap of each blank-line separated paragraph.

    Words are split on ASCII whitespace only; an editor does not treat
    exotic Unicode spaces as break opportunities.
    """
    out = []
    for para in _PARA_SPLIT.split(text):
        words = [w for w in _ASCII_WS.split(para) if w]
        lines, cur = [], ""
        for w in words:
            if not cur:
                cur = w
            elif len(cur) + 1 + len(w) <= width:
                cur += " " + w
            else:
                lines.append(cur)
                cur = w
        if cur:
            lines.append(cur)
        out.append("\n".join(lines))
    return "\n\n".join(out)


_OPENERS = set("([{<\u2018\u201c-\u2013\u2014")


def t03_smart_quotes(text: str) -> str:
    chars = list(text)
    for i, c in enumerate(chars):
        if c not in "'\"":
            continue
        prev = chars[i - 1] if i else ""
        opening = not prev or prev.isspace() or prev in _OPENERS
        if c == '"':
            chars[i] = "\u201c" if opening else "\u201d"
        else:
            chars[i] = "\u2018" if opening else "\u2019"
    return "".join(chars)


_TRAILING = re.compile(r"[ \t]+$", re.MULTILINE)


def t04_trailing_ws(text: str) -> str:
    return _TRAILING.sub("", text)


def t05_nfkc(text: str) -> str:
    return unicodedata.normalize("NFKC", text)


_ANY_WS = re.compile(r"\s+")


def t06_collapse_ws(text: str) -> str:
    return _ANY_WS.sub(" ", text)


def t07_strip_format(text: str) -> str:
    return "".join(c for c in text if unicodedata.category(c) != "Cf")


_ZW_DELETE = str.maketrans({c: None for c in ZW_ALPHABET})
_CONFUSABLE_FOLD = str.maketrans(CYRILLIC_TO_LATIN)


def t08_strip_zw(text: str) -> str:
    return text.translate(_ZW_DELETE)


def t09_fold_homoglyphs(text: str) -> str:
    return text.translate(_CONFUSABLE_FOLD)


def t10_ascii_only(text: str) -> str:
    # deletion, not transliteration
    return text.encode("ascii", "ignore").decode("ascii")


_PUNCT_DELETE = str.maketrans({c: None for c in string.punctuation})


def t11_punct_case(text: str) -> str:
    return text.translate(_PUNCT_DELETE).lower()


def t12_paraphrase(text: str, paraphrase_cmd: str | None = None, timeout: float = 300.0) -> str:
    """Pipe *text* through an external rewriting command (stdin -> stdout)."""
    cmd = paraphrase_cmd or os.environ.get(PARAPHRASE_ENV)
    if not cmd:
        raise TransformUnavailable("T12 needs a paraphrase_cmd")
    proc = subprocess.run(
        shlex.split(cmd), input=text, capture_output=True, text=True,
        encoding="utf-8", timeout=timeout, check=False,
    )
    if proc.returncode != 0:
        raise TransformUnavailable(f"paraphrase command exited {proc.returncode}: {proc.stderr.strip()}")
    return proc.stdout


@dataclass(frozen=True)
class Transform:
    id: str
    name: str
    tier: int
    apply: Callable[[str], str]

    def __call__(self, text: str) -> str:
        return self.apply(text)


TRANSFORMS: dict[str, Transform] = {
    t.id: t
    for t in (
        Transform("T00", "passthrough", 0, t00_identity),
        Transform("T01", "copy-paste normalization", 1, t01_copy_paste),
        Transform("T02", "line reflow", 1, t02_reflow),
        Transform("T03", "smart quotes", 1, t03_smart_quotes),
        Transform("T04", "trailing whitespace strip", 1, t04_trailing_ws),
        Transform("T05", "NFKC normalization", 2, t05_nfkc),
        Transform("T06", "whitespace collapse", 2, t06_collapse_ws),
        Transform("T07", "format character strip", 2, t07_strip_format),
        Transform("T08", "zero-width strip", 3, t08_strip_zw),
        Transform("T09", "homoglyph normalization", 3, t09_fold_homoglyphs),
        Transform("T10", "non-ASCII strip", 3, t10_ascii_only),
        Transform("T11", "punctuation/case strip", 4, t11_punct_case),
        Transform("T12", "paraphrase", 4, t12_paraphrase),
    )
}

CHAINS: dict[str, tuple[str, ...]] = {
    "Tier-0": ("T00",),
    "Tier-1": ("T01", "T02", "T03", "T04"),
    "Tier-2": ("T05", "T06", "T07"),
    "Tier-3": ("T08", "T09", "T10"),
    "Tier-1+2": ("T01", "T02", "T03", "T04", "T05", "T06", "T07"),
    "Tier-1+2+3": ("T01", "T02", "T03", "T04", "T05", "T06", "T07", "T08", "T09", "T10"),
    "Tier-4": ("T12",),
}


def apply_transform(tid: str, text: str, paraphrase_cmd: str | None = None) -> str:
    try:
        t = TRANSFORMS[tid]
    except KeyError:
        raise ValueError(f"unknown transform {tid!r}") from None
    if tid == "T12":
        return t12_paraphrase(text, paraphrase_cmd)
    return t(text)


def resolve_chain(chain: str | tuple[str, ...] | list[str]) -> tuple[str, ...]:
    """Accept a chain name (``Tier-2``), a transform id, a comma list, or a sequence."""
    if isinstance(chain, str):
        if chain in CHAINS:
            return CHAINS[chain]
        steps = tuple(s.strip() for s in chain.split(",") if s.strip())
    else:
        steps = tuple(chain)
    for s in steps:
        if s not in TRANSFORMS:
            raise ValueError(f"unknown transform or chain {s!r}")
    return steps


def apply_chain(chain, text: str, paraphrase_cmd: str | None = None) -> str:
    for tid in resolve_chain(chain):
        text = apply_transform(tid, text, paraphrase_cmd)
    return text


def chain_available(chain, paraphrase_cmd: str | None = None) -> bool:
    """T12 is the only step that can be missing."""
    if "T12" not in resolve_chain(chain):
        return True
    return bool(paraphrase_cmd or os.environ.get(PARAPHRASE_ENV))
