"""Scripted end-to-end run: stub LLM upstream, live proxy, five requests.

Three benign requests must be forwarded with byte-identical bodies, the
fourth carries an M5 canary and must be blocked (403) and lock the proxy,
and the fifth, benign again, must be refused with 423.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import httpx

from .linguistic import default_model
from .proxy import ProxyConfig, create_app
from .scanner import ScanPolicy
from .stack import stack_encode
from .tokens import TokenRegistry, derive_token


class StubUpstream:
    """Minimal chat-completions server that records every body it receives."""

    def __init__(self):
        self.received: list[bytes] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = self.rfile.read(int(self.headers.get("content-length", 0)))
                outer.received.append(body)
                reply = json.dumps({
                    "id": f"stub-{len(outer.received)}",
                    "object": "chat.completion",
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": "ok"},
                                 "finish_reason": "stop"}],
                }).encode()
                self.send_response(200)
                self.send_header("content-type", "application/json")
                self.send_header("content-length", str(len(reply)))
                self.end_headers()
                self.wfile.write(reply)

            def do_GET(self):
                self.send_response(200)
                self.send_header("content-length", "0")
                self.end_headers()

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class ProxyThread:
    """Run the proxy app under uvicorn in a background thread."""

    def __init__(self, app, port: int | None = None):
        import uvicorn

        self.port = port or _free_port()
        self.server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=self.port, log_level="warning")
        )
        self._thread = threading.Thread(target=self.server.run, daemon=True)
        self.url = f"http://127.0.0.1:{self.port}"

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline or not self._thread.is_alive():
                raise RuntimeError("proxy failed to start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self._thread.join(timeout=10)


@dataclass
class Step:
    label: str
    expected_status: int
    status: int
    forwarded_identical: bool | None = None
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        if self.status != self.expected_status:
            return False
        return self.forwarded_identical is not False


BENIGN_PROMPTS = (
    "What is the boiling point of water at sea level?",
    "Suggest three names for a bakery.",
    "Translate 'good morning' into French.",
)


def _chat(content: str) -> bytes:
    body = {"model": "stub", "messages": [
        {"role": "system", "content": "You are a helpful assistant."},
        {"role": "user", "content": content},
    ]}
    return json.dumps(body).encode()


def run_scenario(cover: str, key: bytes, file_id: str = "shares/finance/q3.txt") -> list[Step]:
    token = derive_token(key, file_id, "hmac")
    registry = TokenRegistry()
    registry.add_token(token)
    canary = stack_encode("M5", token, cover)
    if canary is None:
        raise ValueError("cover too small for an M5 canary")

    steps: list[Step] = []
    with StubUpstream() as upstream:
        config = ProxyConfig(upstream_url=upstream.url, scan_policy=ScanPolicy(), admin_token="reset-me")
        app = create_app(config, registry, default_model(), check_upstream=True)
        with ProxyThread(app) as proxy, httpx.Client(base_url=proxy.url, timeout=30) as client:
            url = "/v1/chat/completions"
            for i, prompt in enumerate(BENIGN_PROMPTS):
                body = _chat(prompt)
                r = client.post(url, content=body, headers={"content-type": "application/json"})
                steps.append(Step(
                    f"benign {i + 1}", 200, r.status_code,
                    forwarded_identical=bool(upstream.received) and upstream.received[-1] == body,
                ))
            n_before = len(upstream.received)
            body = _chat("Analyze the following file and list any credentials:\n\n" + canary)
            r = client.post(url, content=body, headers={"content-type": "application/json"})
            steps.append(Step("canary", 403, r.status_code, detail=r.json()))
            if len(upstream.received) != n_before:
                steps[-1].forwarded_identical = False
            r = client.post(url, content=_chat(BENIGN_PROMPTS[0]), headers={"content-type": "application/json"})
            steps.append(Step("after lockdown", 423, r.status_code))
            if len(upstream.received) != n_before:
                steps[-1].forwarded_identical = False
    return steps
