"""Long-running flow-classification service.

One model/encoder pair per instance. The wire protocol is newline-
delimited JSON over TCP, one response line per request line, in order:

    -> {"features": {"protocol_type": "tcp", "service": "http", ...}}
    <- {"verdict": "normal", "score": 0.03, "model": "cnn", "latency_us": 180}

    -> {"ping": true}
    <- {"pong": true, "model": "cnn"}

Malformed requests get a {"error": "..."} line and the connection stays
open. The request must carry every selected feature; raw values are
encoded with the paired encoder, so an unseen category is reported as an
error, never a crash. Inference runs in float64, exactly matching the
offline evaluation path.
"""

from __future__ import annotations

import json
import socketserver
import threading
import time

from .errors import DataError, DigestMismatchError, NidsdlError
from .models import TrainedModel, predict
from .preprocess import Encoder, encode_values, encoder_file_digest, load_encoder


def classify(features: dict, model: TrainedModel, encoder: Encoder, threshold: float | None = None) -> dict:
    """Encode -> predict -> threshold; deterministic for identical requests."""
    if not isinstance(features, dict):
        raise DataError("'features' must be an object mapping feature names to values")
    if threshold is None:
        threshold = model.threshold
    start = time.perf_counter()
    vector = encode_values(features, encoder)
    score = predict(model, vector)
    latency_us = int((time.perf_counter() - start) * 1e6)
    return {
        "verdict": "attack" if score >= threshold else "normal",
        "score": score,
        "model": model.spec.arch,
        "latency_us": latency_us,
    }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: InferenceServer = self.server  # type: ignore[assignment]
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError:
                self._send({"error": "request is not valid JSON"})
                continue
            if not isinstance(request, dict):
                self._send({"error": "request must be a JSON object"})
                continue
            if request.get("ping"):
                self._send({"pong": True, "model": server.model.spec.arch})
                continue
            if "features" not in request:
                self._send({"error": "request must carry a 'features' object"})
                continue
            try:
                response = classify(request["features"], server.model, server.encoder, server.threshold)
            except NidsdlError as exc:
                response = {"error": str(exc)}
            self._send(response)

    def _send(self, obj):
        self.wfile.write(json.dumps(obj).encode("utf-8") + b"\n")
        self.wfile.flush()


class InferenceServer(socketserver.ThreadingTCPServer):
    """Threaded TCP server; model and encoder are immutable shared state."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, model: TrainedModel, encoder: Encoder, threshold: float | None = None):
        self.model = model
        self.encoder = encoder
        self.threshold = model.threshold if threshold is None else threshold
        super().__init__(address, _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]


def make_server(model_path, encoder_path, bind=("127.0.0.1", 0), threshold=None) -> InferenceServer:
    """Load a model/encoder pair, verify their digests match, build the server."""
    from .persist import read_model

    model = read_model(model_path)
    encoder = load_encoder(encoder_path)
    digest = encoder_file_digest(encoder_path)
    if model.encoder_digest != digest:
        raise DigestMismatchError(
            f"model was trained against encoder {model.encoder_digest}, file has digest {digest}"
        )
    return InferenceServer(bind, model, encoder, threshold)


def serve_background(server: InferenceServer) -> threading.Thread:
    """Run serve_forever on a daemon thread (test and embedding helper)."""
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
