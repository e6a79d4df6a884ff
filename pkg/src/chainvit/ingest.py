"""Pending-transaction ingestion over Ethereum JSON-RPC, and the live watch loop.

The pool is read with ``txpool_content``; nodes without the txpool namespace
fall back to ``eth_getBlockByNumber("pending", true)``.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections import OrderedDict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Iterable, TextIO

import httpx
import numpy as np

from .dataset import TxRecord
from .disasm import parse_hex

log = logging.getLogger(__name__)

RPC_URL_ENV = "CHAINVIT_RPC_URL"
MAX_GAS = 2**64 - 1


class RpcError(Exception):
    pass


class RpcConnectionError(RpcError):
    pass


class RpcTimeoutError(RpcError):
    pass


class RpcProtocolError(RpcError):
    """The node answered with something that is not a usable JSON-RPC response."""


class RpcMethodError(RpcError):
    def __init__(self, code: int, message: str):
        super().__init__(f"JSON-RPC error {code}: {message}")
        self.code = code


class TxDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class RpcEndpoint:
    url: str
    timeout: float = 10.0
    poll_interval: float = 2.0
    auth_token: str | None = None
    max_retries: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.timeout <= 0 or self.poll_interval <= 0:
            raise ValueError("timeout and poll_interval must be positive")

    @classmethod
    def from_env(cls, url: str | None = None, **kw) -> RpcEndpoint:
        url = url or os.environ.get(RPC_URL_ENV)
        if not url:
            raise ValueError(f"no RPC URL given and {RPC_URL_ENV} is unset")
        return cls(url, **kw)


@dataclass(frozen=True)
class RawTx:
    """Wire-level pending transaction; quantities are kept as hex strings."""

    hash: str
    input: str
    gas: str
    value: str
    from_: str | None = None
    to: str | None = None

    @classmethod
    def from_json(cls, obj: Any) -> RawTx:
        if not isinstance(obj, dict):
            raise TxDecodeError(f"transaction is not an object: {obj!r:.80}")
        fields = {"hash": obj.get("hash"), "input": obj.get("input", obj.get("data", "0x"))}
        fields["gas"] = obj.get("gas")
        fields["value"] = obj.get("value")
        for name, v in fields.items():
            if not isinstance(v, str):
                raise TxDecodeError(f"transaction field {name!r} is {v!r:.40}, expected a string")
        return cls(**fields, from_=obj.get("from"), to=obj.get("to"))


def parse_quantity(text: str, field: str, limit: int | None = None) -> int:
    if not isinstance(text, str) or text[:2] not in ("0x", "0X") or len(text) < 3:
        raise TxDecodeError(f"{field}: not a hex quantity: {text!r}")
    try:
        v = int(text[2:], 16)
    except ValueError:
        raise TxDecodeError(f"{field}: invalid hex quantity {text!r}") from None
    if limit is not None and v > limit:
        raise TxDecodeError(f"{field}: {v} exceeds {limit}")
    return v


def to_record(raw: RawTx) -> TxRecord:
    try:
        parse_hex(raw.input)
    except ValueError as exc:
        raise TxDecodeError(f"input: {exc}") from None
    input_hex = raw.input.lower()
    if not input_hex.startswith("0x"):
        input_hex = "0x" + input_hex
    return TxRecord(
        input_hex=input_hex,
        gas=parse_quantity(raw.gas, "gas", MAX_GAS),
        value=parse_quantity(raw.value, "value"),
        tx_id=raw.hash,
    )


def to_quantity(v: int) -> str:
    return hex(v)


class RpcClient:
    def __init__(
        self,
        endpoint: RpcEndpoint,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        headers = {"Content-Type": "application/json"}
        if endpoint.auth_token:
            headers["Authorization"] = f"Bearer {endpoint.auth_token}"
        self.endpoint = endpoint
        self._http = httpx.Client(timeout=endpoint.timeout, headers=headers, transport=transport)
        self._sleep = sleep
        self._id = 0

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> RpcClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, payload: dict) -> bytes:
        try:
            resp = self._http.post(self.endpoint.url, json=payload)
        except httpx.TimeoutException as exc:
            raise RpcTimeoutError(f"{self.endpoint.url}: timed out ({exc})") from exc
        except httpx.TransportError as exc:
            raise RpcConnectionError(f"{self.endpoint.url}: {exc}") from exc
        if resp.status_code >= 500:
            raise RpcConnectionError(f"{self.endpoint.url}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise RpcProtocolError(f"{self.endpoint.url}: HTTP {resp.status_code}")
        return resp.content

    def call(self, method: str, params: list | None = None) -> Any:
        """One JSON-RPC call; transient transport failures are retried with backoff."""
        self._id += 1
        payload = {"jsonrpc": "2.0", "id": self._id, "method": method, "params": params or []}
        delay = self.endpoint.backoff
        for attempt in range(self.endpoint.max_retries + 1):
            try:
                body = self._post(payload)
                break
            except (RpcConnectionError, RpcTimeoutError) as exc:
                if attempt == self.endpoint.max_retries:
                    raise
                log.warning("%s failed (%s); retrying in %.2fs", method, exc, delay)
                self._sleep(delay)
                delay *= 2
        return _decode_response(body)

    def fetch_pending(self) -> list[RawTx]:
        try:
            result = self.call("txpool_content")
            txs = _flatten_txpool(result)
        except RpcMethodError as exc:
            log.debug("txpool_content unavailable (%s); using pending block", exc)
            block = self.call("eth_getBlockByNumber", ["pending", True])
            txs = (block or {}).get("transactions", []) if isinstance(block, dict) else None
            if txs is None:
                raise RpcProtocolError("pending block is not an object") from None
        out = []
        for obj in txs:
            try:
                out.append(RawTx.from_json(obj))
            except TxDecodeError as exc:
                log.warning("skipping undecodable pending transaction: %s", exc)
        return out


def _decode_response(body: bytes) -> Any:
    try:
        msg = json.loads(body)
    except json.JSONDecodeError as exc:
        raise RpcProtocolError(f"malformed JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(msg, dict):
        raise RpcProtocolError("JSON-RPC response is not an object")
    if msg.get("error") is not None:
        err = msg["error"]
        if not isinstance(err, dict):
            raise RpcProtocolError(f"malformed error member: {err!r}")
        raise RpcMethodError(int(err.get("code", 0)), str(err.get("message", "")))
    if "result" not in msg:
        raise RpcProtocolError("JSON-RPC response has neither result nor error")
    return msg["result"]


def _flatten_txpool(result: Any) -> list[Any]:
    if not isinstance(result, dict):
        raise RpcProtocolError("txpool_content result is not an object")
    pending = result.get("pending") or {}
    txs = []
    for sender in sorted(pending):
        by_nonce = pending[sender]
        if not isinstance(by_nonce, dict):
            raise RpcProtocolError(f"txpool entry for {sender} is not an object")
        for nonce in sorted(by_nonce, key=lambda n: int(n) if str(n).isdigit() else 0):
            txs.append(by_nonce[nonce])
    return txs


def fetch_pending(endpoint: RpcEndpoint, transport: httpx.BaseTransport | None = None) -> list[RawTx]:
    with RpcClient(endpoint, transport) as client:
        return client.fetch_pending()


class _SeenWindow:
    def __init__(self, size: int):
        self.size = size
        self._seen: OrderedDict[str, None] = OrderedDict()

    def add(self, key: str) -> bool:
        """Record ``key``; False if it was already in the window."""
        if key in self._seen:
            self._seen.move_to_end(key)
            return False
        self._seen[key] = None
        if len(self._seen) > self.size:
            self._seen.popitem(last=False)
        return True


def watch(
    client: RpcClient,
    detector,
    sink: TextIO,
    *,
    window: int = 100_000,
    max_polls: int | None = None,
    max_backoff: float = 60.0,
    sleep: Callable[[float], None] = time.sleep,
    now: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
) -> int:
    """Poll the pending pool and write one JSON line per newly seen transaction.

    Node outages and bad transactions are logged and never end the loop.
    Returns the number of classification lines written.
    """
    seen = _SeenWindow(window)
    written = 0
    polls = 0
    delay = client.endpoint.poll_interval
    while max_polls is None or polls < max_polls:
        polls += 1
        try:
            raws = client.fetch_pending()
        except RpcError as exc:
            log.error("poll %d failed: %s; backing off %.1fs", polls, exc, delay)
            sleep(delay)
            delay = min(delay * 2, max_backoff)
            continue
        delay = client.endpoint.poll_interval
        fresh = [r for r in raws if seen.add(r.hash)]
        written += _classify_and_emit(fresh, detector, sink, now)
        if max_polls is None or polls < max_polls:
            sleep(client.endpoint.poll_interval)
    return written


def _classify_and_emit(raws: Iterable[RawTx], detector, sink: TextIO, now) -> int:
    records = []
    images = []
    for raw in raws:
        try:
            rec = to_record(raw)
            images.append(detector.encoder.encode(rec))
        except (TxDecodeError, ValueError) as exc:
            log.warning("skipping tx %s: %s", raw.hash, exc)
            continue
        records.append(rec)
    if not records:
        return 0
    preds = detector.classify_images(np.stack(images).astype(np.float32))
    stamp = now().isoformat()
    for rec, pred in zip(records, preds):
        line = {
            "timestamp": stamp,
            "hash": rec.tx_id,
            "class_name": pred.class_name,
            "class_id": pred.class_id,
            "max_logit": pred.max_logit,
            "logits": pred.logits,
        }
        sink.write(json.dumps(line) + "\n")
    sink.flush()
    return len(records)
