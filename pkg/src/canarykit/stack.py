"""Layer composition: configurations M1-M7, stacked encode and inverse decode.

Every layer embeds the same framed payload independently. Decoding walks
the layers in reverse, stripping each one after reading it, so the text
handed to the linguistic decoder is the generated cover byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .linguistic import LmParams, RefModel, default_model, lm_decode, lm_encode
from .symbolic import SYMBOLIC_CODECS
from .tokens import InvalidArgument, ScanIdentity, TokenRegistry, frame, verify

LAYER_NAMES = ("WS", "ZW", "HG", "LM")
CAPACITY_MARGIN = 1.25
MAX_COVER_RETRIES = 4


@dataclass(frozen=True)
class StackConfig:
    id: str
    layers: tuple[str, ...]
    mode: str | None = None  # "A": caller supplies cover, "B": LM generates it

    def __post_init__(self):
        if not self.layers:
            raise InvalidArgument("a configuration needs at least one layer")
        for name in self.layers:
            if name not in LAYER_NAMES:
                raise InvalidArgument(f"unknown layer {name!r}")
        if len(set(self.layers)) != len(self.layers):
            raise InvalidArgument("layers may not repeat")
        if "LM" in self.layers and self.layers[0] != "LM":
            raise InvalidArgument("LM generates the cover and must be the first layer")

    @property
    def generates_cover(self) -> bool:
        return self.layers[0] == "LM"

    @property
    def decode_order(self) -> tuple[str, ...]:
        return self.layers[::-1]


CONFIGS: dict[str, StackConfig] = {
    c.id: c
    for c in (
        StackConfig("M1", ("WS",), "A"),
        StackConfig("M2", ("ZW",), "A"),
        StackConfig("M3", ("HG",), "A"),
        StackConfig("M4", ("LM",), "B"),
        StackConfig("M5", ("WS", "ZW", "HG"), "A"),
        StackConfig("M6", ("LM", "ZW", "HG"), "B"),
        StackConfig("M7", ("LM", "WS", "ZW", "HG"), None),
    )
}


def get_config(spec: str | StackConfig) -> StackConfig:
    """``"M5"`` or a comma-separated layer list such as ``"LM,ZW"``."""
    if isinstance(spec, StackConfig):
        return spec
    key = spec.strip()
    if key.upper() in CONFIGS:
        return CONFIGS[key.upper()]
    layers = tuple(p.strip().upper() for p in key.split(",") if p.strip())
    return StackConfig(",".join(layers), layers, "B" if layers and layers[0] == "LM" else "A")


def validate_composition(config: StackConfig) -> list[str]:
    warnings = []
    if "LM" in config.layers and "WS" in config.layers:
        warnings.append(
            f"{config.id}: WS layered over LM cover. Deleting its Unicode spaces "
            "(e.g. a non-ASCII strip) merges generated words and breaks the LM "
            "layer; prefer ZW/HG on generated text."
        )
    return warnings


# --- encode -----------------------------------------------------------------


def _shortfall(layers, cover: str, payload_len: int) -> float:
    """Largest need/have ratio over symbolic layers (<= 1 means it fits)."""
    worst = 0.0
    for name in layers:
        cap = SYMBOLIC_CODECS[name].capacity(cover)
        worst = max(worst, payload_len / max(cap, 1))
    return worst


def generate_cover(
    config: StackConfig,
    payload: bytes,
    model: RefModel | None = None,
    lm_params: LmParams | None = None,
) -> str | None:
    """Generate an LM cover long enough for the symbolic layers stacked on it.

    The first attempt uses the caller's ``min_cover_chars``; if a downstream
    layer would not fit, the minimum length is scaled up by the observed
    shortfall plus a 25% margin and the cover regenerated (deterministic).
    """
    params = lm_params or LmParams()
    downstream = config.layers[1:]
    for _ in range(MAX_COVER_RETRIES + 1):
        cover = lm_encode(payload, model, params)
        if cover is None:
            return None
        ratio = _shortfall(downstream, cover, len(payload))
        if ratio <= 1.0:
            return cover
        need = math.ceil(len(cover) * ratio * CAPACITY_MARGIN)
        params = params.with_(min_cover_chars=max(need, params.min_cover_chars + 1))
    return None


def encode_stages(
    config: StackConfig | str,
    payload: bytes,
    cover: str | None = None,
    model: RefModel | None = None,
    lm_params: LmParams | None = None,
) -> list[str] | None:
    """All intermediate texts: ``[cover, after layer 1, after layer 2, ...]``."""
    config = get_config(config)
    frame(payload)  # validate length up front
    if config.generates_cover:
        text = generate_cover(config, payload, model, lm_params)
        if text is None:
            return None
        symbolic = config.layers[1:]
    else:
        if cover is None:
            raise InvalidArgument(f"{config.id} embeds into an existing cover; none given")
        text = cover
        symbolic = config.layers
    stages = [text]
    for name in symbolic:
        codec = SYMBOLIC_CODECS[name]
        if codec.capacity(text) < len(payload):
            return None
        text = codec.encode(text, payload)
        if text is None:
            return None
        stages.append(text)
    return stages


def stack_encode(
    config: StackConfig | str,
    payload: bytes,
    cover: str | None = None,
    model: RefModel | None = None,
    lm_params: LmParams | None = None,
) -> str | None:
    stages = encode_stages(config, payload, cover, model, lm_params)
    return None if stages is None else stages[-1]


# --- decode -----------------------------------------------------------------


@dataclass
class StackResult:
    per_layer: dict[str, bytes | None]
    verified: dict[str, ScanIdentity | None] = field(default_factory=dict)
    restored: str | None = None  # text handed to the LM decoder, if any

    @property
    def any(self) -> bool:
        if self.verified:
            return any(v is not None for v in self.verified.values())
        return any(p is not None for p in self.per_layer.values())

    @property
    def verified_identity(self) -> ScanIdentity | None:
        return next((v for v in self.verified.values() if v is not None), None)

    def recovered(self, payload: bytes) -> dict[str, bool]:
        return {k: v == payload for k, v in self.per_layer.items()}


def stack_decode(
    config: StackConfig | str,
    text: str,
    registry: TokenRegistry | None = None,
    scheme: str = "hmac",
    model: RefModel | None = None,
    lm_params: LmParams | None = None,
) -> StackResult:
    config = get_config(config)
    result = StackResult(per_layer={})
    for name in config.decode_order:
        if name == "LM":
            result.restored = text
            payload = lm_decode(text, model or default_model(), lm_params)
        else:
            codec = SYMBOLIC_CODECS[name]
            payload = codec.decode(text)
            text = codec.strip_encoding(text)
        result.per_layer[name] = payload
        if registry is not None:
            result.verified[name] = verify(payload, registry, scheme) if payload else None
    return result
