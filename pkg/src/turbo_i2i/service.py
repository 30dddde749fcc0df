"""HTTP inference service.

Plain HTTP/1.1 + JSON with base64 PNG payloads, served by the standard
library's threading server.  The loaded model is immutable; every request
draws its noise map from a request-local generator seeded by the request,
so concurrent requests cannot interfere.

Endpoints:
  POST /translate   {"image": b64 png, "domain": str, "gamma": float,
                     "seed": int, "model": optional str}
                 -> {"image": b64 png, "latency_ms": float, "gamma": float,
                     "seed": int}
  GET  /health   -> {"status": "ok", "model_id": ..., "config_hash": ...}
  GET  /models   -> {"models": [{"id": ..., "config_hash": ..., "domains": [...]}]}
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch

from .checkpoint import load_manifest, load_translator
from .errors import ShapeError, ValidationError
from .generator import OneStepTranslator
from .images import png_bytes, png_from_bytes

log = logging.getLogger(__name__)

DEFAULT_MAX_BYTES = 4 * 1024 * 1024


class ModelHost:
    """Immutable model plus the manifest identity it was loaded with."""

    def __init__(self, model: OneStepTranslator, model_id: str, config_hash: str):
        model.eval()
        self.model = model
        self.model_id = model_id
        self.config_hash = config_hash

    @staticmethod
    def from_checkpoint(path) -> "ModelHost":
        manifest = load_manifest(path)
        model = load_translator(path)
        return ModelHost(model, manifest.get("model_id", "model"), manifest["config_hash"])

    def translate_request(self, payload: dict) -> dict:
        if not isinstance(payload, dict):
            raise ValidationError("request body must be a JSON object")
        if payload.get("model") not in (None, self.model_id):
            raise ValidationError(f"unknown model {payload.get('model')!r}")
        if "image" not in payload or "domain" not in payload:
            raise ValidationError("request needs 'image' (base64 PNG) and 'domain'")
        gamma = float(payload.get("gamma", 1.0))
        seed = int(payload.get("seed", 0))
        try:
            raw = base64.b64decode(payload["image"], validate=True)
            img = png_from_bytes(raw)
        except (binascii.Error, ValueError, OSError) as exc:
            raise ValidationError(f"image is not valid base64 PNG: {exc}") from exc
        start = time.perf_counter()
        gen = torch.Generator().manual_seed(seed)
        z = self.model.sample_noise(img.unsqueeze(0), generator=gen).squeeze(0).unsqueeze(0)
        out = self.model.translate(img, payload["domain"], z=z, gamma=gamma)
        latency_ms = (time.perf_counter() - start) * 1000.0
        return {
            "image": base64.b64encode(png_bytes(out)).decode("ascii"),
            "latency_ms": latency_ms,
            "gamma": gamma,
            "seed": seed,
        }


def _make_handler(host: ModelHost, max_bytes: int):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - " + fmt, self.address_string(), *args)

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok", "model_id": host.model_id,
                                 "config_hash": host.config_hash})
            elif self.path == "/models":
                self._send(200, {"models": [{
                    "id": host.model_id,
                    "config_hash": host.config_hash,
                    "domains": list(host.model.config.domains),
                }]})
            else:
                self._send(404, {"error": f"unknown path {self.path}"})

        def do_POST(self):
            if self.path != "/translate":
                self._send(404, {"error": f"unknown path {self.path}"})
                return
            length = int(self.headers.get("Content-Length", 0))
            if length > max_bytes:
                self._send(413, {"error": f"request exceeds {max_bytes} bytes"})
                return
            try:
                payload = json.loads(self.rfile.read(length))
            except json.JSONDecodeError as exc:
                self._send(400, {"error": f"malformed JSON: {exc}"})
                return
            try:
                self._send(200, host.translate_request(payload))
            except (ValidationError, ShapeError) as exc:
                self._send(400, {"error": str(exc)})
            except Exception as exc:  # inference failure
                log.exception("translate failed")
                self._send(500, {"error": f"inference failed: {exc}"})

    return Handler


def create_server(host: ModelHost, port: int, bind: str = "127.0.0.1",
                  max_bytes: int = DEFAULT_MAX_BYTES) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((bind, port), _make_handler(host, max_bytes))


def serve(checkpoint, port: int, bind: str = "127.0.0.1",
          max_bytes: int = DEFAULT_MAX_BYTES) -> None:
    host = ModelHost.from_checkpoint(checkpoint)
    server = create_server(host, port, bind, max_bytes)
    log.info("serving %s on %s:%d", host.model_id, bind, server.server_address[1])
    try:
        server.serve_forever()
    finally:
        server.server_close()
