"""Ingestion-side scan engine.

Phase 1 runs the symbolic decoders (WS, ZW, HG) over the raw text, stripping
each surface after reading it and repeating up to ``max_strip_depth`` passes.
Phase 2 runs the linguistic decoder on every extracted region of the fully
stripped text. Any verified candidate is a match.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .linguistic import LmParams, RefModel, default_model, lm_decode
from .symbolic import SYMBOLIC_CODECS
from .tokens import SCHEMES, InvalidArgument, ScanIdentity, TokenRegistry, verify

SYMBOLIC_ORDER = ("WS", "ZW", "HG")
DEFAULT_DELIMITERS = ("<<<DOC>>>", "<<<END>>>")


@dataclass(frozen=True)
class ScanPolicy:
    max_strip_depth: int = 2
    early_terminate: bool = True
    scheme: str = "hmac"
    region_delimiters: tuple[str, str] | None = None
    lm_params: LmParams = field(default_factory=LmParams)

    def __post_init__(self):
        if self.max_strip_depth < 1:
            raise InvalidArgument("max_strip_depth must be >= 1")
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"scheme must be one of {SCHEMES}")
        if self.region_delimiters is not None:
            object.__setattr__(self, "region_delimiters", tuple(self.region_delimiters))

    @classmethod
    def from_dict(cls, data: dict) -> "ScanPolicy":
        data = dict(data)
        lm = data.pop("lm_params", None)
        if lm is not None:
            data["lm_params"] = LmParams(**lm)
        if data.get("region_delimiters") is not None:
            data["region_delimiters"] = tuple(data["region_delimiters"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ScanPolicy":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScanVerdict:
    matched: bool = False
    identity: ScanIdentity | None = None
    layer: str | None = None
    latency_ms: dict[str, float] = field(default_factory=dict)
    candidates: int = 0

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "layer": self.layer,
            "identity": self.identity.to_dict() if self.identity else None,
            "latency_ms": {k: round(v, 4) for k, v in self.latency_ms.items()},
            "candidates": self.candidates,
        }


def extract_regions(text: str, policy: ScanPolicy | None = None) -> list[str]:
    """Delimited spans of *text*, or the whole text when none are found."""
    delims = policy.region_delimiters if policy else None
    if not delims:
        return [text]
    open_, close = delims
    pattern = re.compile(re.escape(open_) + r"(.*?)" + re.escape(close), re.DOTALL)
    spans = pattern.findall(text)
    return spans or [text]


def scan(
    text: str,
    registry: TokenRegistry,
    policy: ScanPolicy | None = None,
    model: RefModel | None = None,
) -> ScanVerdict:
    policy = policy or ScanPolicy()
    verdict = ScanVerdict()

    def record(name: str, payload: bytes | None, started: int) -> bool:
        verdict.latency_ms[name] = verdict.latency_ms.get(name, 0.0) + (
            time.perf_counter_ns() - started
        ) / 1e6
        if payload is None:
            return False
        verdict.candidates += 1
        ident = verify(payload, registry, policy.scheme)
        if ident is not None and not verdict.matched:
            verdict.matched, verdict.identity, verdict.layer = True, ident, name
        return ident is not None

    # phase 1: symbolic surfaces, decode then strip, repeated
    for _ in range(policy.max_strip_depth):
        before = text
        for name in SYMBOLIC_ORDER:
            codec = SYMBOLIC_CODECS[name]
            t0 = time.perf_counter_ns()
            payload = codec.decode(text)
            hit = record(name, payload, t0)
            if hit and policy.early_terminate:
                return verdict
            text = codec.strip_encoding(text)
        if text == before:
            break

    # phase 2: linguistic layer on each region of the stripped text
    model = model or default_model()
    for region in extract_regions(text, policy):
        t0 = time.perf_counter_ns()
        payload = lm_decode(region, model, policy.lm_params)
        if record("LM", payload, t0) and policy.early_terminate:
            break
    return verdict
