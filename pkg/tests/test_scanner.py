import json

import pytest

from canarykit.corpus import load_corpus, unmarked_documents
from canarykit.scanner import ScanPolicy, extract_regions, scan
from canarykit.stack import CONFIGS, stack_encode
from canarykit.tokens import InvalidArgument, TokenRegistry, derive_token, eddsa_public_key
from canarykit.transport import apply_chain

KEY = b"scanner test organisation key"


@pytest.fixture(scope="module")
def cover():
    return load_corpus()[1][1]


@pytest.fixture(scope="module")
def registry():
    reg = TokenRegistry()
    reg.add_token(derive_token(KEY, "f", "hmac"))
    reg.add_public_key("acme", eddsa_public_key(KEY))
    return reg


def test_m5_matches_ws_first_with_early_terminate(cover, registry):
    text = stack_encode("M5", derive_token(KEY, "f", "hmac"), cover)
    v = scan(text, registry, ScanPolicy())
    assert v.matched and v.layer == "WS"
    assert set(v.latency_ms) == {"WS"}


def test_early_terminate_only_changes_attribution(cover, registry):
    text = stack_encode("M5", derive_token(KEY, "f", "hmac"), cover)
    full = scan(text, registry, ScanPolicy(early_terminate=False))
    assert full.matched and {"WS", "ZW", "HG", "LM"} <= set(full.latency_ms)


def test_m6_after_tier2_matches_hg(registry):
    text = stack_encode("M6", derive_token(KEY, "f", "hmac"))
    v = scan(apply_chain("Tier-2", text), registry)
    assert v.matched and v.layer == "HG"


def test_m6_after_tier3_matches_lm(registry):
    text = stack_encode("M6", derive_token(KEY, "f", "hmac"))
    v = scan(apply_chain("Tier-3", text), registry)
    assert v.matched and v.layer == "LM"


def test_eddsa_scheme(cover, registry):
    text = stack_encode("M5", derive_token(KEY, "g", "eddsa"), cover * 2)
    assert scan(text, registry, ScanPolicy(scheme="eddsa")).matched
    assert not scan(text, registry, ScanPolicy(scheme="hmac")).matched


@pytest.mark.parametrize("name", list(CONFIGS))
def test_completeness_at_tier0(name, cover, registry):
    text = stack_encode(name, derive_token(KEY, "f", "hmac"), cover)
    assert scan(text, registry).matched


def test_regions():
    pol = ScanPolicy(region_delimiters=("<<<DOC>>>", "<<<END>>>"))
    assert extract_regions("Analyze the following content <<<DOC>>>X<<<END>>>", pol) == ["X"]
    assert extract_regions("a <<<DOC>>>1<<<END>>> b <<<DOC>>>2<<<END>>>", pol) == ["1", "2"]
    assert extract_regions("no delimiters", ScanPolicy()) == ["no delimiters"]
    assert extract_regions("unmatched", pol) == ["unmatched"]


def test_wrapped_lm_canary_needs_region(registry):
    text = apply_chain("Tier-3", stack_encode("M6", derive_token(KEY, "f", "hmac")))
    wrapped = "Analyze the following content.\n<<<DOC>>>" + text + "<<<END>>>\nList secrets."
    assert not scan(wrapped, registry).matched
    pol = ScanPolicy(region_delimiters=("<<<DOC>>>", "<<<END>>>"))
    v = scan(wrapped, registry, pol)
    assert v.matched and v.layer == "LM"


def test_second_region_triggers(registry):
    text = stack_encode("M4", derive_token(KEY, "f", "hmac"))
    wrapped = "<<<DOC>>>nothing here<<<END>>> and <<<DOC>>>" + text + "<<<END>>>"
    assert scan(wrapped, registry, ScanPolicy(region_delimiters=("<<<DOC>>>", "<<<END>>>"))).matched


def test_unmarked_documents_never_match(registry):
    for _, text in unmarked_documents(30):
        for scheme in ("hmac", "eddsa"):
            assert not scan(text, registry, ScanPolicy(scheme=scheme)).matched


def test_empty_and_garbage_inputs(registry):
    assert not scan("", registry).matched
    assert not scan("\u200b\u200c\u2008\u0430", registry).matched


def test_policy_roundtrip(tmp_path):
    pol = ScanPolicy(max_strip_depth=3, region_delimiters=("[", "]"), scheme="eddsa")
    path = tmp_path / "p.json"
    path.write_text(json.dumps(pol.to_dict()))
    assert ScanPolicy.load(path) == pol
    with pytest.raises(InvalidArgument):
        ScanPolicy(max_strip_depth=0)


def test_verdict_dict(cover, registry):
    v = scan(stack_encode("M1", derive_token(KEY, "f", "hmac"), cover), registry)
    d = v.to_dict()
    assert d["matched"] and d["layer"] == "WS" and d["identity"]["scheme"] == "hmac"
