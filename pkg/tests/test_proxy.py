import json
import time

import httpx
import pytest
from fastapi.testclient import TestClient

from canarykit.corpus import load_corpus
from canarykit.e2e import run_scenario
from canarykit.linguistic import default_model
from canarykit.proxy import ProxyConfig, create_app, message_texts
from canarykit.scanner import ScanPolicy
from canarykit.stack import stack_encode
from canarykit.tokens import InvalidArgument, TokenRegistry, derive_token
from canarykit.transport import apply_chain

KEY = b"proxy test organisation key"
URL = "/v1/chat/completions"
DELIMS = ("<<<DOC>>>", "<<<END>>>")


class Upstream:
    def __init__(self, status=200):
        self.bodies = []
        self.status = status

    def __call__(self, request: httpx.Request):
        self.bodies.append((request.url.path, request.content))
        data = json.dumps({"choices": [{"message": {"content": "ok"}}]}).encode()
        # a real byte stream, as a network transport would hand back
        return httpx.Response(self.status, headers={"content-type": "application/json"},
                              stream=httpx.ByteStream(data))


def chat(content):
    return json.dumps({"model": "m", "messages": [{"role": "user", "content": content}]}).encode()


@pytest.fixture
def token():
    return derive_token(KEY, "docs/plan.txt", "hmac")


@pytest.fixture
def registry(token):
    reg = TokenRegistry()
    reg.add_token(token)
    return reg


def make(registry, upstream=None, tmp_path=None, **cfg):
    upstream = upstream or Upstream()
    client = httpx.AsyncClient(transport=httpx.MockTransport(upstream))
    config = ProxyConfig(
        upstream_url="http://upstream.test", admin_token="sesame",
        audit_log=str(tmp_path / "audit.jsonl") if tmp_path else None, **cfg,
    )
    app = create_app(config, registry, default_model(), client=client)
    return TestClient(app), upstream


def test_benign_forwarded_verbatim(registry):
    tc, up = make(registry)
    with tc:
        body = chat("hello there")
        r = tc.post(URL, content=body, headers={"content-type": "application/json"})
    assert r.status_code == 200 and r.json()["choices"][0]["message"]["content"] == "ok"
    assert up.bodies == [("/v1/chat/completions", body)]


def test_block_lock_and_reset(registry, token, tmp_path):
    tc, up = make(registry, tmp_path=tmp_path)
    canary = stack_encode("M5", token, load_corpus()[0][1])
    with tc:
        r = tc.post(URL, content=chat(canary))
        assert r.status_code == 403
        body = r.json()
        assert body["blocked"] and body["layer"] == "WS" and body["identity_digest"] == token.hex()
        assert body["choices"] == []
        assert tc.post(URL, content=chat("hi")).status_code == 423
        assert tc.get("/v1/models").status_code == 423
        assert tc.post("/admin/reset", headers={"x-admin-token": "nope"}).status_code == 401
        assert tc.get("/admin/status").json()["locked"]
        assert tc.post("/admin/reset", headers={"x-admin-token": "sesame"}).json()["was_locked"]
        assert tc.post(URL, content=chat("hi")).status_code == 200
        # reset when not locked is a no-op
        assert tc.post("/admin/reset", headers={"x-admin-token": "sesame"}).json() == {
            "ok": True, "was_locked": False}
    assert len(up.bodies) == 1
    events = [json.loads(line)["event"] for line in (tmp_path / "audit.jsonl").read_text().splitlines()]
    assert "canary_match" in events and "lockdown_engaged" in events and "lockdown_reset" in events
    for line in (tmp_path / "audit.jsonl").read_text().splitlines():
        assert "timestamp" in json.loads(line)


def test_flag_mode_forwards(registry, token):
    tc, up = make(registry, response_mode="flag")
    canary = stack_encode("M5", token, load_corpus()[0][1])
    with tc:
        assert tc.post(URL, content=chat(canary)).status_code == 200
        assert tc.post(URL, content=chat("x")).status_code == 200
    assert len(up.bodies) == 2


def test_lockdown_disabled(registry, token):
    tc, _ = make(registry, lockdown_enabled=False)
    canary = stack_encode("M5", token, load_corpus()[0][1])
    with tc:
        assert tc.post(URL, content=chat(canary)).status_code == 403
        assert tc.post(URL, content=chat("x")).status_code == 200


def test_region_aware_m6(registry, token):
    tc, _ = make(registry, scan_policy=ScanPolicy(region_delimiters=DELIMS))
    doc = apply_chain("Tier-3", stack_encode("M6", token))
    wrapped = f"Analyze the following content.\n{DELIMS[0]}{doc}{DELIMS[1]}"
    with tc:
        r = tc.post(URL, content=chat(wrapped))
    assert r.status_code == 403 and r.json()["layer"] == "LM"


def test_all_roles_and_parts_scanned(registry, token):
    canary = stack_encode("M2", token, load_corpus()[0][1])
    body = {"messages": [
        {"role": "system", "content": "be nice"},
        {"role": "assistant", "content": [{"type": "text", "text": canary}]},
    ]}
    assert message_texts(body) == ["be nice", canary]
    tc, _ = make(registry)
    with tc:
        assert tc.post(URL, content=json.dumps(body)).status_code == 403


@pytest.mark.parametrize("body", [b"{not json", b"[]", b'{"messages": 3}'])
def test_malformed(registry, body):
    tc, up = make(registry)
    with tc:
        assert tc.post(URL, content=body).status_code == 400
    assert up.bodies == []


def test_upstream_down(registry):
    def boom(request):
        raise httpx.ConnectError("refused")

    tc, _ = make(registry, upstream=boom)
    with tc:
        assert tc.post(URL, content=chat("hi")).status_code == 502


def test_upstream_status_relayed(registry):
    tc, _ = make(registry, upstream=Upstream(status=429))
    with tc:
        assert tc.post(URL, content=chat("hi")).status_code == 429


def test_other_paths_not_scanned(registry, token):
    tc, up = make(registry)
    canary = stack_encode("M5", token, load_corpus()[0][1])
    with tc:
        assert tc.post("/v1/embeddings", content=chat(canary)).status_code == 200
        assert tc.get("/v1/models").status_code == 200
    assert [p for p, _ in up.bodies] == ["/v1/embeddings", "/v1/models"]


def test_scan_timeout_forwards(registry, token, monkeypatch):
    import canarykit.proxy as proxy_mod

    def slow(*a, **k):
        time.sleep(0.5)
        raise AssertionError("unreachable")

    monkeypatch.setattr(proxy_mod, "scan", slow)
    tc, up = make(registry, scan_timeout_s=0.05)
    with tc:
        assert tc.post(URL, content=chat("x")).status_code == 200
    assert len(up.bodies) == 1


def test_config_validation():
    with pytest.raises(InvalidArgument):
        ProxyConfig(upstream_url="http://x", response_mode="drop")
    cfg = ProxyConfig.from_dict({"upstream_url": "http://x/", "scan_policy": {"max_strip_depth": 3}})
    assert cfg.upstream_url == "http://x" and cfg.scan_policy.max_strip_depth == 3


def test_live_scenario():
    steps = run_scenario(load_corpus()[2][1], KEY)
    assert [s.status for s in steps] == [200, 200, 200, 403, 423]
    assert all(s.ok for s in steps)
