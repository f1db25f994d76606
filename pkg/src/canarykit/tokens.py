"""Per-file canary identifiers: derivation, framing and verification.

Two schemes are supported:

* ``hmac``  - ``HMAC-SHA256(key, file_id)[:16]``; the verifier holds a registry
  of known 16-byte tokens.
* ``eddsa`` - ``file_uuid = SHA-256(file_id)[:4]`` signed with an Ed25519 key
  derived from the organisation key; the verifier holds only public keys.

Every embedding layer carries ``frame(token)``: a 2-byte big-endian length
followed by the token body.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

HMAC_TOKEN_LEN = 16
UUID_LEN = 4
SIGNATURE_LEN = 64
EDDSA_TOKEN_LEN = UUID_LEN + SIGNATURE_LEN
MIN_KEY_LEN = 16
MAX_FRAME_BODY = 0xFFFF

SCHEMES = ("hmac", "eddsa")

KEY_FILE_ENV = "CANARYKIT_KEY_FILE"


class InvalidArgument(ValueError):
    pass


class MalformedFrame(ValueError):
    pass


def _check_key(key: bytes) -> bytes:
    if not isinstance(key, (bytes, bytearray)) or len(key) < MIN_KEY_LEN:
        raise InvalidArgument(f"organisation key must be at least {MIN_KEY_LEN} bytes")
    return bytes(key)


def _check_file_id(file_id: str) -> bytes:
    if not isinstance(file_id, str) or not file_id:
        raise InvalidArgument("file_id must be a non-empty string")
    return file_id.encode("utf-8")


def load_key(path: str | os.PathLike | None = None) -> bytes:
    """Read an organisation key from *path*, or from the file named by
    ``$CANARYKIT_KEY_FILE``. The raw key never travels through the environment."""
    if path is None:
        path = os.environ.get(KEY_FILE_ENV)
        if not path:
            raise InvalidArgument(f"no key file given and ${KEY_FILE_ENV} is unset")
    return _check_key(Path(path).read_bytes().strip())


# --- derivation -------------------------------------------------------------


def derive_hmac_token(key: bytes, file_id: str) -> bytes:
    """Return ``HMAC-SHA256(key, file_id)`` truncated to 16 bytes."""
    key = _check_key(key)
    return hmac.digest(key, _check_file_id(file_id), "sha256")[:HMAC_TOKEN_LEN]


def eddsa_private_key(key: bytes) -> Ed25519PrivateKey:
    # seed = SHA-256(key) so any key length maps onto a valid 32-byte seed
    seed = hashlib.sha256(_check_key(key)).digest()
    return Ed25519PrivateKey.from_private_bytes(seed)


def eddsa_public_key(key: bytes) -> bytes:
    """Raw 32-byte Ed25519 public key derived from the organisation key."""
    return eddsa_private_key(key).public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )


@dataclass(frozen=True)
class EddsaToken:
    file_uuid: bytes
    signature: bytes

    def __post_init__(self):
        if len(self.file_uuid) != UUID_LEN or len(self.signature) != SIGNATURE_LEN:
            raise InvalidArgument("EdDSA token needs a 4-byte uuid and 64-byte signature")

    def __bytes__(self) -> bytes:
        return self.file_uuid + self.signature

    @classmethod
    def from_bytes(cls, body: bytes) -> "EddsaToken":
        if len(body) != EDDSA_TOKEN_LEN:
            raise InvalidArgument(f"EdDSA token body must be {EDDSA_TOKEN_LEN} bytes")
        return cls(body[:UUID_LEN], body[UUID_LEN:])


def derive_eddsa_token(key: bytes, file_id: str) -> EddsaToken:
    file_uuid = hashlib.sha256(_check_file_id(file_id)).digest()[:UUID_LEN]
    signature = eddsa_private_key(key).sign(file_uuid)
    return EddsaToken(file_uuid, signature)


def derive_token(key: bytes, file_id: str, scheme: str = "hmac") -> bytes:
    """Token body for *scheme*, ready to be framed and embedded."""
    if scheme == "hmac":
        return derive_hmac_token(key, file_id)
    if scheme == "eddsa":
        return bytes(derive_eddsa_token(key, file_id))
    raise InvalidArgument(f"unknown scheme {scheme!r}")


def token_digest(body: bytes) -> str:
    return body.hex()


# --- framing ----------------------------------------------------------------


def frame(body: bytes) -> bytes:
    """Prefix *body* with its length as a 16-bit big-endian integer."""
    n = len(body)
    if not 1 <= n <= MAX_FRAME_BODY:
        raise InvalidArgument(f"frame body must be 1..{MAX_FRAME_BODY} bytes, got {n}")
    return n.to_bytes(2, "big") + bytes(body)


def unframe(data: bytes) -> bytes:
    """Inverse of :func:`frame`. Bytes past the declared body are padding and
    are ignored. A declared length of zero is never produced by ``frame`` and
    is rejected."""
    if len(data) < 2:
        raise MalformedFrame("fewer than 2 bytes")
    n = int.from_bytes(data[:2], "big")
    if n == 0:
        raise MalformedFrame("zero-length frame")
    if len(data) - 2 < n:
        raise MalformedFrame(f"declared {n} bytes, only {len(data) - 2} available")
    return bytes(data[2 : 2 + n])


def try_unframe(data: bytes) -> bytes | None:
    try:
        return unframe(data)
    except MalformedFrame:
        return None


# --- registry and verification ----------------------------------------------


@dataclass(frozen=True)
class ScanIdentity:
    """What a verified payload resolved to."""

    scheme: str
    digest: str
    org_id: str | None = None
    file_uuid: str | None = None

    def to_dict(self) -> dict:
        d = {"scheme": self.scheme, "digest": self.digest}
        if self.org_id is not None:
            d["org_id"] = self.org_id
            d["file_uuid"] = self.file_uuid
        return d


class _BulkTokenIndex:
    """Sorted array of 16-byte tokens for registries too large for a set.

    Lookups bisect on the first 8 bytes (as a big-endian uint64) and then
    compare the full token among the (almost always single) hits.
    """

    def __init__(self, tokens: np.ndarray):
        raw = np.ascontiguousarray(tokens).view(np.uint8).reshape(-1, HMAC_TOKEN_LEN)
        prefix = raw[:, :8].copy().view(">u8").ravel().astype(np.uint64)
        order = np.argsort(prefix, kind="stable")
        self.prefix = prefix[order]
        self.rows = raw[order]

    def __len__(self) -> int:
        return len(self.prefix)

    def __contains__(self, token: bytes) -> bool:
        key = np.uint64(int.from_bytes(token[:8], "big"))
        lo = int(np.searchsorted(self.prefix, key, side="left"))
        hi = int(np.searchsorted(self.prefix, key, side="right"))
        return any(self.rows[i].tobytes() == token for i in range(lo, hi))


@dataclass
class TokenRegistry:
    """Known HMAC tokens (exact match) and Ed25519 public keys by org id.

    Readers take a snapshot-free path: ``tokens`` and ``public_keys`` are only
    replaced wholesale by :meth:`replace_from`, never mutated during a scan.
    """

    tokens: frozenset = field(default_factory=frozenset)
    public_keys: dict = field(default_factory=dict)
    bulk: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)
    _pk_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def add_token(self, token: bytes) -> None:
        if len(token) != HMAC_TOKEN_LEN:
            raise InvalidArgument("HMAC registry entries are 16 bytes")
        with self._lock:
            self.tokens = self.tokens | {bytes(token)}

    def add_tokens(self, tokens: Iterable[bytes]) -> None:
        new = {bytes(t) for t in tokens}
        if any(len(t) != HMAC_TOKEN_LEN for t in new):
            raise InvalidArgument("HMAC registry entries are 16 bytes")
        with self._lock:
            self.tokens = self.tokens | new

    def add_bulk(self, tokens: np.ndarray) -> None:
        """Register a large ``(n, 16)`` uint8 array (or ``n`` x ``S16``) of tokens."""
        with self._lock:
            self.bulk = [*self.bulk, _BulkTokenIndex(tokens)]

    def add_public_key(self, org_id: str, public_key: bytes) -> None:
        if len(public_key) != 32:
            raise InvalidArgument("Ed25519 public keys are 32 bytes")
        if not org_id or "\t" in org_id or "\n" in org_id:
            raise InvalidArgument("org_id must be non-empty and contain no tabs/newlines")
        with self._lock:
            self.public_keys = {**self.public_keys, org_id: bytes(public_key)}

    def replace_from(self, other: "TokenRegistry") -> None:
        """Atomically adopt another registry's contents (hot reload)."""
        with self._lock:
            self.tokens, self.public_keys, self.bulk = (
                other.tokens,
                dict(other.public_keys),
                list(other.bulk),
            )
            self._pk_cache = {}

    def __len__(self) -> int:
        return len(self.tokens) + sum(len(b) for b in self.bulk) + len(self.public_keys)

    def has_token(self, token: bytes) -> bool:
        if token in self.tokens:
            return True
        return any(token in b for b in self.bulk)

    def _verifier(self, org_id: str, pk: bytes) -> Ed25519PublicKey:
        obj = self._pk_cache.get((org_id, pk))
        if obj is None:
            obj = Ed25519PublicKey.from_public_bytes(pk)
            self._pk_cache[(org_id, pk)] = obj
        return obj

    # persistence: one hex token per line, or ``org_id<TAB>hex-pk``
    def dumps(self) -> str:
        lines = sorted(t.hex() for t in self.tokens)
        for b in self.bulk:
            lines.extend(row.tobytes().hex() for row in b.rows)
        lines.extend(f"{org}\t{pk.hex()}" for org, pk in sorted(self.public_keys.items()))
        return "".join(line + "\n" for line in lines)

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "TokenRegistry":
        reg = cls()
        tokens = set()
        keys = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if "\t" in line:
                    org_id, pk_hex = line.split("\t", 1)
                    pk = bytes.fromhex(pk_hex.strip())
                    if len(pk) != 32:
                        raise ValueError("public key must be 32 bytes")
                    keys[org_id] = pk
                else:
                    tok = bytes.fromhex(line)
                    if len(tok) != HMAC_TOKEN_LEN:
                        raise ValueError("token must be 16 bytes")
                    tokens.add(tok)
            except ValueError as exc:
                raise InvalidArgument(f"registry line {lineno}: {exc}") from None
        reg.tokens = frozenset(tokens)
        reg.public_keys = keys
        return reg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TokenRegistry":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def verify(payload: bytes | None, registry: TokenRegistry, scheme: str = "hmac") -> ScanIdentity | None:
    """Resolve an unframed candidate payload against *registry*.

    Every rejection returns ``None`` with no further detail.
    """
    if not payload:
        return None
    if scheme == "hmac":
        if len(payload) == HMAC_TOKEN_LEN and registry.has_token(payload):
            return ScanIdentity("hmac", token_digest(payload))
        return None
    if scheme == "eddsa":
        if len(payload) != EDDSA_TOKEN_LEN:
            return None
        uuid, sig = payload[:UUID_LEN], payload[UUID_LEN:]
        for org_id, pk in registry.public_keys.items():
            try:
                registry._verifier(org_id, pk).verify(sig, uuid)
            except InvalidSignature:
                continue
            return ScanIdentity("eddsa", f"{org_id}:{uuid.hex()}", org_id, uuid.hex())
        return None
    return None
