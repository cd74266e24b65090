import threading
import time
from pathlib import Path

import pytest
import uvicorn

from scorebridge import AdapterConfig, build_app

TESTS_DIR = Path(__file__).parent
GOLDEN_DIR = TESTS_DIR.parent.parent / "wire_conformance"


class ServerHandle:
    def __init__(self, server: uvicorn.Server, thread: threading.Thread):
        self._server = server
        self._thread = thread
        sock = server.servers[0].sockets[0]
        host, port = sock.getsockname()[:2]
        self.url = f"http://{host}:{port}"

    def stop(self):
        self._server.should_exit = True
        self._thread.join(timeout=10)


@pytest.fixture()
def serve_model(tmp_path):
    """Factory: write a model script, serve it, hand back the base URL."""
    handles = []

    def _serve(model_source: str, token=None, max_request_bytes=None):
        script = tmp_path / f"model_{len(handles)}.py"
        script.write_text(model_source)
        kwargs = {"model_path": str(script), "token": token}
        if max_request_bytes is not None:
            kwargs["max_request_bytes"] = max_request_bytes
        cfg = AdapterConfig(**kwargs)
        app = build_app(cfg)
        server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.time() + 10
        while not server.started:
            if time.time() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        handle = ServerHandle(server, thread)
        handles.append(handle)
        return handle.url

    yield _serve
    for h in handles:
        h.stop()


@pytest.fixture()
def fixture_png():
    return (GOLDEN_DIR / "fixture_16.png").read_bytes()
