"""Prose covers: the 20 embedded documents, user corpora, and an unmarked set."""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

from .tokens import InvalidArgument

MIN_CHARS = 3000


def _embedded_files() -> list[tuple[str, str]]:
    root = resources.files("canarykit") / "data" / "corpus"
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".txt"))
    return [(n, (root / n).read_text(encoding="utf-8")) for n in names]


def load_corpus(corpus_dir: str | Path | None = None, min_chars: int = MIN_CHARS) -> list[tuple[str, str]]:
    """``(file_id, text)`` pairs, sorted by name.

    With no directory the embedded corpus is used. Files shorter than
    *min_chars* are skipped.
    """
    if corpus_dir is None:
        files = _embedded_files()
        prefix = "corpus"
    else:
        root = Path(corpus_dir)
        if not root.is_dir():
            raise InvalidArgument(f"{root} is not a directory")
        files = [(p.name, p.read_text(encoding="utf-8")) for p in sorted(root.glob("*.txt"))]
        prefix = root.name
    docs = [(f"{prefix}/{name}", text) for name, text in files if len(text) >= min_chars]
    if not docs:
        raise InvalidArgument(f"no corpus files of at least {min_chars} characters")
    return docs


def unmarked_documents(n: int = 100, seed: int = 0, min_chars: int = MIN_CHARS) -> list[tuple[str, str]]:
    """At least *n* clean documents: the originals, then seeded paragraph
    shuffles across the whole corpus, each at least *min_chars* long."""
    base = load_corpus(min_chars=min_chars)
    docs = list(base[:n])
    paragraphs = [p for _, text in base for p in text.split("\n\n") if p.strip()]
    rng = random.Random(seed)
    i = 0
    while len(docs) < n:
        parts: list[str] = []
        while sum(len(p) + 2 for p in parts) < min_chars:
            parts.append(rng.choice(paragraphs).strip())
        docs.append((f"mixed/{i:03d}.txt", "\n\n".join(parts) + "\n"))
        i += 1
    return docs
