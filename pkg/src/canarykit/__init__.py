"""Steganographic canary files for detecting document exfiltration into LLMs."""

from .linguistic import LmParams, RefModel, build_ref_model, canonicalize, default_model, lm_decode, lm_encode
from .scanner import ScanPolicy, ScanVerdict, extract_regions, scan
from .stack import CONFIGS, StackConfig, StackResult, stack_decode, stack_encode, validate_composition
from .symbolic import HG, WS, ZW
from .tokens import TokenRegistry, derive_token, frame, unframe, verify
from .transport import CHAINS, TRANSFORMS, apply_chain, apply_transform

__version__ = "0.1.0"

__all__ = [
    "CHAINS", "CONFIGS", "HG", "LmParams", "RefModel", "ScanPolicy", "ScanVerdict",
    "StackConfig", "StackResult", "TRANSFORMS", "TokenRegistry", "WS", "ZW",
    "apply_chain", "apply_transform", "build_ref_model", "canonicalize", "default_model",
    "derive_token", "extract_regions", "frame", "lm_decode", "lm_encode", "scan",
    "stack_decode", "stack_encode", "unframe", "validate_composition", "verify",
]
