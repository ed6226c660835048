"""JSON-RPC 2.0 over HTTP for public verification queries.

Methods:
  birthmark_lookup  params: [hex image_hash]        -> {status, record}
  birthmark_chain   params: [hex image_hash]        -> {status, chain}
  birthmark_stats   params: [] or [records_per_day] -> store + growth stats

Anyone can call these; no credentials are required or accepted.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

import requests

from ..errors import BirthmarkError, BrokenChain, CorruptChain
from .node import Lookup, ValidatorNode
from .store import projected_growth

_RPC_ERR_INVALID_REQUEST = -32600
_RPC_ERR_METHOD_NOT_FOUND = -32601
_RPC_ERR_INVALID_PARAMS = -32602


def _lookup_response(node: ValidatorNode, image_hash_hex: str) -> dict:
    status, record = node.lookup(bytes.fromhex(image_hash_hex))
    return {
        "status": status.value,
        "record": record.to_json_dict() if status == Lookup.FOUND else None,
    }


def _chain_response(node: ValidatorNode, image_hash_hex: str) -> dict:
    image_hash = bytes.fromhex(image_hash_hex)
    status, _record = node.lookup(image_hash)
    if status != Lookup.FOUND:
        return {"status": status.value, "chain": []}
    try:
        chain = node.custody_chain(image_hash)
    except BrokenChain as exc:
        return {"status": "broken_chain", "chain": [], "missing": exc.at_hash.hex()}
    except CorruptChain:
        return {"status": "corrupt_chain", "chain": []}
    return {"status": "found", "chain": [r.to_json_dict() for r in chain]}


def _stats_response(node: ValidatorNode, records_per_day: float) -> dict:
    stats = node.store.stats().to_json_dict()
    stats["projected"] = projected_growth(records_per_day)
    return stats


def dispatch(node: ValidatorNode, method: str, params: list) -> dict:
    if method == "birthmark_lookup":
        if len(params) != 1:
            raise ValueError("birthmark_lookup takes one hex image hash")
        return _lookup_response(node, params[0])
    if method == "birthmark_chain":
        if len(params) != 1:
            raise ValueError("birthmark_chain takes one hex image hash")
        return _chain_response(node, params[0])
    if method == "birthmark_stats":
        per_day = float(params[0]) if params else 1_000_000.0
        return _stats_response(node, per_day)
    raise KeyError(method)


class NodeRpcServer:
    """Threaded HTTP JSON-RPC front end for one validator node."""

    def __init__(self, node: ValidatorNode, host: str = "127.0.0.1", port: int = 0):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    request = json.loads(self.rfile.read(length))
                except (ValueError, json.JSONDecodeError):
                    self._reply({"jsonrpc": "2.0", "id": None,
                                 "error": {"code": _RPC_ERR_INVALID_REQUEST, "message": "bad request"}})
                    return
                rid = request.get("id")
                method = request.get("method", "")
                params = request.get("params", [])
                try:
                    result = dispatch(outer.node, method, params)
                    self._reply({"jsonrpc": "2.0", "id": rid, "result": result})
                except KeyError:
                    self._reply({"jsonrpc": "2.0", "id": rid,
                                 "error": {"code": _RPC_ERR_METHOD_NOT_FOUND, "message": f"no method {method}"}})
                except (ValueError, BirthmarkError) as exc:
                    self._reply({"jsonrpc": "2.0", "id": rid,
                                 "error": {"code": _RPC_ERR_INVALID_PARAMS, "message": str(exc)}})

            def _reply(self, payload: dict):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, fmt, *args):  # quiet server
                pass

        self.node = node
        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "NodeRpcServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "NodeRpcServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def rpc_call(url: str, method: str, params: list, timeout: float = 10.0) -> dict:
    """Single JSON-RPC call; raises BirthmarkError on transport problems."""
    try:
        response = requests.post(
            url,
            json={"jsonrpc": "2.0", "id": 1, "method": method, "params": params},
            timeout=timeout,
        )
        response.raise_for_status()
        payload = response.json()
    except requests.RequestException as exc:
        raise BirthmarkError(f"node unreachable: {exc}") from exc
    if "error" in payload:
        raise BirthmarkError(f"rpc error: {payload['error'].get('message')}")
    return payload["result"]
