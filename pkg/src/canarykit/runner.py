"""Experiment grids: per-transform ablation, stacking, false positives, timing.

Every grid writes an aggregate CSV (``config, chain, layer, files,
recovered, rate``) and a raw per-file log next to it, so every rate can be
recomputed independently.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import load_corpus, unmarked_documents
from .linguistic import LmParams, RefModel, default_model, lm_decode, lm_extract_candidate
from .scanner import ScanPolicy, scan
from .stack import CONFIGS, StackConfig, encode_stages, get_config, stack_decode
from .symbolic import SYMBOLIC_CODECS
from .tokens import (
    HMAC_TOKEN_LEN,
    SCHEMES,
    TokenRegistry,
    derive_token,
    eddsa_public_key,
    verify,
)
from .transport import CHAINS, TRANSFORMS, apply_chain, chain_available

EXPERIMENT_KEY = b"canarykit experiment key 0001"
HEATMAP_CHAINS = tuple(TRANSFORMS)
STACKING_CHAINS = ("Tier-0", "Tier-1", "Tier-2", "Tier-3", "Tier-1+2", "Tier-1+2+3", "Tier-4")
AGG_COLUMNS = ("config", "chain", "layer", "files", "recovered", "rate")
RAW_COLUMNS = ("config", "chain", "file_id", "layer", "encoded", "recovered")


@dataclass
class ExperimentSpec:
    configs: tuple[str, ...] = tuple(CONFIGS)
    chains: tuple[str, ...] = HEATMAP_CHAINS
    corpus_dir: str | None = None
    scheme: str = "hmac"
    trials: int | None = None  # files per cell; None = whole corpus
    output_path: str | None = None
    key: bytes = EXPERIMENT_KEY
    paraphrase_cmd: str | None = None
    min_chars: int = 3000
    lm_params: LmParams = field(default_factory=LmParams)


@dataclass
class GridResult:
    rows: list[dict]
    raw: list[dict]
    skipped: list[str]

    def rate(self, config: str, chain: str, layer: str) -> float | None:
        for r in self.rows:
            if (r["config"], r["chain"], r["layer"]) == (config, chain, layer):
                return r["rate"]
        return None


def _file_ids(config: StackConfig, docs, n: int) -> list[tuple[str, str | None]]:
    if config.generates_cover:
        return [(f"generated_{i}", None) for i in range(n)]
    return [(fid, text) for fid, text in docs[:n]]


def run_grid(spec: ExperimentSpec, model: RefModel | None = None) -> GridResult:
    model = model or default_model()
    docs = load_corpus(spec.corpus_dir, spec.min_chars)
    n = spec.trials or len(docs)
    chains = [c for c in spec.chains if chain_available(c, spec.paraphrase_cmd)]
    skipped = [c for c in spec.chains if c not in chains]
    raw: list[dict] = []
    for cfg_name in spec.configs:
        config = get_config(cfg_name)
        for file_id, cover in _file_ids(config, docs, n):
            payload = derive_token(spec.key, file_id, spec.scheme)
            stages = encode_stages(config, payload, cover, model, spec.lm_params)
            for chain in chains:
                if stages is None:
                    outcome = {layer: False for layer in config.layers}
                else:
                    moved = apply_chain(chain, stages[-1], spec.paraphrase_cmd)
                    res = stack_decode(config, moved, model=model, lm_params=spec.lm_params)
                    outcome = res.recovered(payload)
                for layer in config.layers:
                    raw.append({
                        "config": config.id, "chain": chain, "file_id": file_id, "layer": layer,
                        "encoded": stages is not None, "recovered": bool(outcome[layer]),
                    })
    rows = aggregate(raw)
    result = GridResult(rows, raw, skipped)
    if spec.output_path:
        write_csv(result, spec.output_path)
    return result


def aggregate(raw: list[dict]) -> list[dict]:
    """Per-layer rates plus an ``ANY`` row (per-file union across layers)."""
    cells: dict[tuple[str, str], dict[str, dict[str, bool]]] = {}
    for r in raw:
        cells.setdefault((r["config"], r["chain"]), {}).setdefault(r["file_id"], {})[r["layer"]] = r["recovered"]
    rows = []
    for (config, chain), per_file in cells.items():
        layers = list(next(iter(per_file.values())))
        files = len(per_file)
        for layer in [*layers, "ANY"]:
            if layer == "ANY":
                hits = sum(any(v.values()) for v in per_file.values())
            else:
                hits = sum(v[layer] for v in per_file.values())
            rows.append({
                "config": config, "chain": chain, "layer": layer, "files": files,
                "recovered": hits, "rate": round(100.0 * hits / files, 2),
            })
    return rows


def write_csv(result: GridResult, path: str | os.PathLike) -> tuple[Path, Path]:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, AGG_COLUMNS)
        w.writeheader()
        w.writerows(result.rows)
    raw_path = path.with_name(path.stem + "_raw.csv")
    with raw_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, RAW_COLUMNS)
        w.writeheader()
        w.writerows(result.raw)
    return path, raw_path


def run_heatmap(spec: ExperimentSpec | None = None, model: RefModel | None = None) -> GridResult:
    spec = spec or ExperimentSpec(configs=("M1", "M2", "M3", "M4"), chains=HEATMAP_CHAINS)
    return run_grid(spec, model)


def run_stacking(spec: ExperimentSpec | None = None, model: RefModel | None = None) -> GridResult:
    spec = spec or ExperimentSpec(configs=tuple(CONFIGS), chains=STACKING_CHAINS)
    return run_grid(spec, model)


# --- full-stack compatibility ------------------------------------------------


def run_compat(n: int = 100, config: str = "M7", scheme: str = "hmac", key: bytes = EXPERIMENT_KEY,
               model: RefModel | None = None, lm_params: LmParams | None = None) -> dict:
    """Tier-0 encode/decode of *n* generated canaries: every layer must
    recover and the stripped text must equal the generated cover exactly."""
    model = model or default_model()
    cfg = get_config(config)
    ok = encoded = byte_exact = 0
    for i in range(n):
        payload = derive_token(key, f"generated_{i}", scheme)
        stages = encode_stages(cfg, payload, None, model, lm_params)
        if stages is None:
            continue
        encoded += 1
        res = stack_decode(cfg, stages[-1], model=model, lm_params=lm_params)
        exact = res.restored == stages[0]
        byte_exact += exact
        ok += exact and all(res.recovered(payload).values())
    return {"config": cfg.id, "files": n, "encoded": encoded, "byte_exact": byte_exact, "all_layers": ok}


# --- false positives ---------------------------------------------------------


def build_fp_registry(key: bytes = EXPERIMENT_KEY, size: int = 1000, bulk: int = 0, seed: int = 0) -> TokenRegistry:
    """HMAC tokens for *size* derived file ids, optional *bulk* random tokens
    in the array index, and the org's Ed25519 public key."""
    reg = TokenRegistry()
    reg.add_tokens(derive_token(key, f"share/file_{i:07d}.txt", "hmac") for i in range(size))
    if bulk:
        rng = np.random.default_rng(seed)
        reg.add_bulk(rng.integers(0, 256, size=(bulk, HMAC_TOKEN_LEN), dtype=np.uint8))
    reg.add_public_key("org", eddsa_public_key(key))
    return reg


def random_texts(n: int, seed: int = 0, length: int = 512) -> list[str]:
    rng = np.random.default_rng(seed)
    return [rng.bytes(length).decode("utf-8", "replace") for _ in range(n)]


def run_fp(
    n_docs: int = 100,
    registry: TokenRegistry | None = None,
    model: RefModel | None = None,
    random_inputs: int = 0,
    seed: int = 0,
    output_path: str | None = None,
) -> dict:
    model = model or default_model()
    registry = registry or build_fp_registry()
    docs = unmarked_documents(n_docs, seed)
    report: dict = {"documents": len(docs), "schemes": {}}
    lenient = sum(lm_extract_candidate(text, model) is not None for _, text in docs)
    for scheme in SCHEMES:
        per = {}
        for name in ("WS", "ZW", "HG", "LM"):
            decodes = candidates = verified = 0
            for _, text in docs:
                payload = (lm_decode(text, model) if name == "LM" else SYMBOLIC_CODECS[name].decode(text))
                decodes += 1
                candidates += payload is not None
                verified += verify(payload, registry, scheme) is not None
            per[name] = {"decodes": decodes, "candidates": candidates, "verified": verified}
        report["schemes"][scheme] = per
    report["verified_total"] = sum(d["verified"] for s in report["schemes"].values() for d in s.values())
    report["decodes_total"] = sum(d["decodes"] for s in report["schemes"].values() for d in s.values())
    report["lm_lenient_candidates"] = lenient
    if random_inputs:
        texts = random_texts(random_inputs, seed)
        report["random_inputs"] = random_inputs
        report["random_matches"] = {
            scheme: sum(scan(t, registry, ScanPolicy(scheme=scheme, early_terminate=True), model).matched
                        for t in texts)
            for scheme in SCHEMES
        }
    if output_path:
        Path(output_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report


# --- timing -----------------------------------------------------------------


def _stats(samples_ns: list[int]) -> tuple[float, float, float]:
    ms = [s / 1e6 for s in samples_ns]
    return statistics.fmean(ms), statistics.pstdev(ms), max(ms)


TIMING_COLUMNS = ("config", "files", "encode_mean_ms", "encode_std_ms", "encode_max_ms",
                  "decode_mean_ms", "decode_std_ms", "decode_max_ms",
                  "scan_mean_ms", "scan_std_ms", "scan_max_ms")


def run_timing(spec: ExperimentSpec | None = None, model: RefModel | None = None) -> list[dict]:
    spec = spec or ExperimentSpec(configs=tuple(CONFIGS))
    model = model or default_model()
    docs = load_corpus(spec.corpus_dir, spec.min_chars)
    n = spec.trials or len(docs)
    registry = TokenRegistry()
    if spec.scheme == "eddsa":
        registry.add_public_key("org", eddsa_public_key(spec.key))
    policy = ScanPolicy(scheme=spec.scheme, early_terminate=False)
    rows = []
    for cfg_name in spec.configs:
        config = get_config(cfg_name)
        enc, dec, scn = [], [], []
        for file_id, cover in _file_ids(config, docs, n):
            payload = derive_token(spec.key, file_id, spec.scheme)
            if spec.scheme == "hmac":
                registry.add_token(payload)
            t0 = time.perf_counter_ns()
            text = encode_stages(config, payload, cover, model, spec.lm_params)
            enc.append(time.perf_counter_ns() - t0)
            if text is None:
                continue
            t0 = time.perf_counter_ns()
            stack_decode(config, text[-1], model=model, lm_params=spec.lm_params)
            dec.append(time.perf_counter_ns() - t0)
            t0 = time.perf_counter_ns()
            scan(text[-1], registry, policy, model)
            scn.append(time.perf_counter_ns() - t0)
        row = {"config": config.id, "files": len(enc)}
        for label, samples in (("encode", enc), ("decode", dec), ("scan", scn)):
            m, s, mx = _stats(samples) if samples else (float("nan"),) * 3
            row.update({f"{label}_mean_ms": round(m, 4), f"{label}_std_ms": round(s, 4),
                        f"{label}_max_ms": round(mx, 4)})
        rows.append(row)
    if spec.output_path:
        path = Path(spec.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, TIMING_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    return rows
