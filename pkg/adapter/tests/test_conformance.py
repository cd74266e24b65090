"""Replay the shared golden wire-format cases against the service.

The same files are replayed against the attack toolkit's built-in stub
server by its own test suite; passing on both sides pins the two
implementations to a single wire format.
"""

import json
from pathlib import Path

import pytest
import requests

GOLDEN_DIR = Path(__file__).parent.parent.parent / "wire_conformance"


def load_cases():
    with open(GOLDEN_DIR / "cases.json") as f:
        return json.load(f)


@pytest.fixture()
def golden_url(serve_model):
    spec = load_cases()["model"]
    assert spec["kind"] == "constant"
    return serve_model(f"def score(image_bytes):\n    return {spec['value']!r}\n")


@pytest.mark.parametrize("case", load_cases()["cases"], ids=lambda c: c["name"])
def test_golden_case(golden_url, case):
    if "request_parts" in case:
        files = [
            ("images", (name, (GOLDEN_DIR / name).read_bytes(), "image/png"))
            for name in case["request_parts"]
        ]
        resp = requests.post(golden_url + case["endpoint"], files=files, timeout=5)
    else:
        body = (GOLDEN_DIR / case["request"]).read_bytes()
        resp = requests.post(
            golden_url + case["endpoint"],
            data=body,
            headers={"Content-Type": "image/png"},
            timeout=5,
        )
    assert resp.status_code == case["expect_status"]
    if "expect_json" in case:
        assert resp.json() == case["expect_json"]
    if case.get("expect_error_key"):
        assert "error" in resp.json()
