"""HTTP endpoint client tests against an in-process server."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from compoz import EndpointError
from compoz.planner import HttpLvlmClient


class _Handler(BaseHTTPRequestHandler):
    reply: dict = {}
    status: int = 200
    last: dict = {}

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        _Handler.last = {
            "body": json.loads(self.rfile.read(length)),
            "auth": self.headers.get("Authorization"),
            "path": self.path,
        }
        payload = json.dumps(_Handler.reply).encode()
        self.send_response(_Handler.status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}/v1/chat"
    srv.shutdown()
    thread.join(timeout=5)


def test_chat_request_and_response_shape(server):
    _Handler.reply = {"choices": [{"message": {"content": "Image 4"}}]}
    _Handler.status = 200
    client = HttpLvlmClient(server, model="test-lvlm", token="sekrit")
    assert client.complete("pick one") == "Image 4"
    body = _Handler.last["body"]
    assert body["model"] == "test-lvlm"
    assert body["messages"] == [{"role": "user", "content": "pick one"}]
    assert _Handler.last["auth"] == "Bearer sekrit"


def test_flat_response_keys_accepted(server):
    client = HttpLvlmClient(server)
    for key in ("response", "content", "text"):
        _Handler.reply = {key: f"via {key}"}
        assert client.complete("p") == f"via {key}"


def test_unrecognized_response_shape_is_an_error(server):
    _Handler.reply = {"weird": 1}
    with pytest.raises(EndpointError, match="shape"):
        HttpLvlmClient(server).complete("p")


def test_http_error_status_raises(server):
    _Handler.reply = {"error": "overloaded"}
    _Handler.status = 503
    try:
        with pytest.raises(EndpointError):
            HttpLvlmClient(server).complete("p")
    finally:
        _Handler.status = 200


def test_unreachable_endpoint_raises():
    client = HttpLvlmClient("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(EndpointError):
        client.complete("p")
