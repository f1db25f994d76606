"""Reverse proxy in front of an OpenAI-compatible chat-completions API.

Chat-completion requests are scanned before they leave; a verified canary
blocks the request and (by default) locks the proxy until an administrator
resets it. Everything else is forwarded byte for byte and the upstream
response is relayed as received, streaming included.
"""

from __future__ import annotations

import asyncio
import datetime as dt
import hmac
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .linguistic import RefModel, default_model
from .scanner import ScanPolicy, ScanVerdict, scan
from .tokens import InvalidArgument, TokenRegistry

log = logging.getLogger("canarykit.proxy")

CHAT_PATH_SUFFIX = "chat/completions"
HOP_BY_HOP = frozenset(
    {"connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
     "te", "trailers", "transfer-encoding", "upgrade", "host", "content-length"}
)


@dataclass
class ProxyConfig:
    upstream_url: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    scan_policy: ScanPolicy = field(default_factory=ScanPolicy)
    registry_path: str | None = None
    response_mode: str = "block"
    lockdown_enabled: bool = True
    admin_token: str | None = None
    scan_timeout_s: float = 5.0
    audit_log: str | None = None

    def __post_init__(self):
        if self.response_mode not in ("block", "flag"):
            raise InvalidArgument("response_mode must be 'block' or 'flag'")
        self.upstream_url = self.upstream_url.rstrip("/")

    @classmethod
    def from_dict(cls, data: dict) -> "ProxyConfig":
        data = dict(data)
        if isinstance(data.get("scan_policy"), dict):
            data["scan_policy"] = ScanPolicy.from_dict(data["scan_policy"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ProxyConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class LockdownState:
    """Sticky lock: set once by a verified match, cleared only by reset."""

    def __init__(self):
        self._mutex = threading.Lock()
        self.locked = False
        self.trigger: ScanVerdict | None = None
        self.locked_at: float | None = None
        self.epoch = 0

    def engage(self, verdict: ScanVerdict) -> bool:
        with self._mutex:
            if self.locked:
                return False
            self.locked, self.trigger, self.locked_at = True, verdict, time.time()
            return True

    def reset(self) -> bool:
        with self._mutex:
            was = self.locked
            self.locked, self.trigger, self.locked_at = False, None, None
            self.epoch += 1
            return was

    def snapshot(self) -> dict:
        with self._mutex:
            return {
                "locked": self.locked,
                "locked_at": self.locked_at,
                "trigger": self.trigger.to_dict() if self.trigger else None,
                "epoch": self.epoch,
            }


class AuditLog:
    def __init__(self, path: str | None):
        self.path = Path(path) if path else None
        self._mutex = threading.Lock()

    def write(self, event: str, **fields) -> dict:
        entry = {"timestamp": dt.datetime.now(dt.timezone.utc).isoformat(), "event": event, **fields}
        line = json.dumps(entry, sort_keys=True)
        log.info(line)
        if self.path is not None:
            with self._mutex, self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return entry


def message_texts(body: dict) -> list[str]:
    """Every content string in ``messages``, across all roles.

    Content may be a plain string or a list of parts with ``text`` fields.
    """
    messages = body.get("messages")
    if not isinstance(messages, list):
        raise ValueError("'messages' must be an array")
    texts = []
    for msg in messages:
        if not isinstance(msg, dict):
            raise ValueError("each message must be an object")
        content = msg.get("content")
        if isinstance(content, str):
            texts.append(content)
        elif isinstance(content, list):
            for part in content:
                if isinstance(part, dict) and isinstance(part.get("text"), str):
                    texts.append(part["text"])
                elif isinstance(part, str):
                    texts.append(part)
    return texts


def _error(status: int, message: str, kind: str) -> JSONResponse:
    return JSONResponse({"error": {"message": message, "type": kind}}, status_code=status)


def _blocked_body(verdict: ScanVerdict) -> dict:
    # shaped so OpenAI-style clients see an empty completion
    return {
        "blocked": True,
        "layer": verdict.layer,
        "identity_digest": verdict.identity.digest if verdict.identity else None,
        "object": "chat.completion",
        "choices": [],
    }


def create_app(
    config: ProxyConfig,
    registry: TokenRegistry | None = None,
    model: RefModel | None = None,
    client: httpx.AsyncClient | None = None,
    check_upstream: bool = False,
) -> FastAPI:
    if registry is None:
        registry = TokenRegistry.load(config.registry_path) if config.registry_path else TokenRegistry()
    model = model or default_model()
    state = LockdownState()
    audit = AuditLog(config.audit_log)
    pool = ThreadPoolExecutor(max_workers=4, thread_name_prefix="scan")

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        own = client is None
        app.state.client = client or httpx.AsyncClient(timeout=httpx.Timeout(60.0, connect=5.0))
        if check_upstream:
            try:
                await app.state.client.get(config.upstream_url)
            except httpx.HTTPError as exc:
                raise RuntimeError(f"upstream {config.upstream_url} unreachable: {exc}") from exc
        try:
            yield
        finally:
            if own:
                await app.state.client.aclose()
            pool.shutdown(wait=False, cancel_futures=True)

    app = FastAPI(lifespan=lifespan)
    app.state.lockdown = state
    app.state.registry = registry
    app.state.audit = audit

    def scan_all(texts: list[str]) -> ScanVerdict:
        merged = ScanVerdict()
        for text in texts:
            v = scan(text, registry, config.scan_policy, model)
            for k, ms in v.latency_ms.items():
                merged.latency_ms[k] = merged.latency_ms.get(k, 0.0) + ms
            merged.candidates += v.candidates
            if v.matched:
                merged.matched, merged.identity, merged.layer = True, v.identity, v.layer
                break
        return merged

    async def forward(request: Request, path: str, body: bytes) -> Response:
        url = f"{config.upstream_url}/{path}"
        headers = [(k, v) for k, v in request.headers.items() if k.lower() not in HOP_BY_HOP]
        upstream_req = app.state.client.build_request(
            request.method, url, params=request.query_params, headers=headers, content=body
        )
        try:
            upstream = await app.state.client.send(upstream_req, stream=True)
        except httpx.HTTPError as exc:
            audit.write("upstream_error", path=path, error=str(exc))
            return _error(502, "upstream unreachable", "bad_gateway")
        out_headers = {
            k: v for k, v in upstream.headers.items()
            if k.lower() not in HOP_BY_HOP or k.lower() == "content-length"
        }

        async def relay():
            try:
                async for chunk in upstream.aiter_raw():
                    yield chunk
            finally:
                await upstream.aclose()

        return StreamingResponse(relay(), status_code=upstream.status_code, headers=out_headers)

    @app.post("/admin/reset")
    async def reset(request: Request):
        supplied = request.headers.get("x-admin-token", "")
        if not config.admin_token or not hmac.compare_digest(supplied, config.admin_token):
            return _error(401, "bad admin token", "unauthorized")
        was_locked = state.reset()
        audit.write("lockdown_reset", was_locked=was_locked)
        return {"ok": True, "was_locked": was_locked}

    @app.get("/admin/status")
    async def status():
        return state.snapshot()

    @app.api_route("/{path:path}", methods=["GET", "POST", "PUT", "PATCH", "DELETE", "OPTIONS", "HEAD"])
    async def handle(request: Request, path: str):
        body = await request.body()
        if state.locked:
            audit.write("rejected_locked", path=path)
            return _error(423, "proxy is locked down after a canary match", "locked")
        if not (request.method == "POST" and path.rstrip("/").endswith(CHAT_PATH_SUFFIX)):
            audit.write("passthrough", path=path, method=request.method)
            return await forward(request, path, body)

        try:
            payload = json.loads(body)
            if not isinstance(payload, dict):
                raise ValueError("body must be a JSON object")
            texts = message_texts(payload)
        except ValueError as exc:
            return _error(400, f"malformed request: {exc}", "invalid_request_error")

        loop = asyncio.get_running_loop()
        try:
            verdict = await asyncio.wait_for(
                loop.run_in_executor(pool, scan_all, texts), timeout=config.scan_timeout_s
            )
        except asyncio.TimeoutError:
            audit.write("scan_timeout", path=path, budget_s=config.scan_timeout_s)
            return await forward(request, path, body)
        except Exception as exc:  # scanning must never take the request down
            audit.write("scan_error", path=path, error=repr(exc))
            return await forward(request, path, body)

        if not verdict.matched:
            audit.write("scan_clean", path=path, latency_ms=verdict.to_dict()["latency_ms"])
            return await forward(request, path, body)

        audit.write(
            "canary_match", path=path, mode=config.response_mode,
            layer=verdict.layer, verdict=verdict.to_dict(),
            latency_ms=verdict.to_dict()["latency_ms"],
        )
        if config.response_mode == "flag":
            return await forward(request, path, body)
        if config.lockdown_enabled and state.engage(verdict):
            audit.write("lockdown_engaged", layer=verdict.layer)
        return JSONResponse(_blocked_body(verdict), status_code=403)

    return app


def serve(config: ProxyConfig, registry: TokenRegistry | None = None) -> None:
    import uvicorn

    app = create_app(config, registry, check_upstream=True)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
