"""Cross-language integration: the TypeScript model server against the adapters.

These tests need `modelserver/` built (npm install && npm run build); they
skip when node or the build output is missing, so the primary suite stands
alone.
"""

import json
import os
import shutil
import subprocess

import numpy as np
import pytest

from certbound.adapters import classify, classify_batch, connect_http, connect_subprocess, load_builtin
from certbound.errors import AdapterError

from fixtures import probit_net_1d, write_model

DIST_MAIN = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                         "modelserver", "dist", "main.js")

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not os.path.exists(DIST_MAIN),
    reason="modelserver not built (cd modelserver && npm install && npm run build)",
)

XOR_NET = {
    "layers": [
        {"w": [[1, 1], [1, 1], [-1, -1], [-1, -1]], "b": [0, -1, 1, 0], "act": "relu"},
        {"w": [[2, -4, 2, -4], [-2, 4, -2, 4]], "b": [0.5, -0.5], "act": "id"},
    ],
    "labels": 2,
}


@pytest.fixture(scope="module", params=["xor", "probit"])
def weights_path(request, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("ts-weights")
    if request.param == "xor":
        return write_model(tmp / "xor.json", XOR_NET)
    return write_model(tmp / "probit.json", probit_net_1d(0.3, 0.7, 0.3, 0.004))


@pytest.fixture()
def http_endpoint(weights_path):
    proc = subprocess.Popen(
        ["node", DIST_MAIN, "http", weights_path, "0"],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        port = int(proc.stdout.readline().split()[1])
        yield f"http://127.0.0.1:{port}"
    finally:
        proc.kill()
        proc.wait()


class TestStdioParity:
    def test_conformance_and_thousand_input_parity(self, weights_path):
        builtin = load_builtin(weights_path)
        with connect_subprocess(["node", DIST_MAIN, "stdio", weights_path]) as remote:
            assert remote.model_digest == builtin.model_digest
            assert remote.label_count == builtin.label_count
            assert not remote.concurrency_safe
            rng = np.random.default_rng(2025)
            xs = rng.uniform(0, 1, (1000, builtin.input_size))
            local = classify_batch(builtin, xs)
            over_wire = classify_batch(remote, xs)
            worst = max(
                max(abs(a - b) for a, b in zip(lc.scores, rc.scores))
                for lc, rc in zip(local, over_wire)
            )
            assert worst <= 1e-9

    def test_error_objects_do_not_kill_the_session(self, weights_path):
        # drive the raw pipe: a malformed line gets an error object, and the
        # server keeps answering afterwards
        proc = subprocess.Popen(
            ["node", DIST_MAIN, "stdio", weights_path],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
        )
        try:
            handshake = json.loads(proc.stdout.readline())
            assert handshake["protocol"] == "certbound/1"
            proc.stdin.write("not json at all\n")
            proc.stdin.flush()
            err = json.loads(proc.stdout.readline())
            assert "error" in err
            size = int(np.prod(handshake["shape"]))
            proc.stdin.write(json.dumps({"id": "after", "input": [0.5] * size}) + "\n")
            proc.stdin.flush()
            resp = json.loads(proc.stdout.readline())
            assert resp["id"] == "after"
            assert len(resp["scores"]) == handshake["labels"]
        finally:
            proc.kill()
            proc.wait()

    def test_adapter_rejects_bad_shapes_before_the_wire(self, weights_path):
        builtin = load_builtin(weights_path)
        with connect_subprocess(["node", DIST_MAIN, "stdio", weights_path]) as remote:
            with pytest.raises(AdapterError):
                classify(remote, [0.5] * (builtin.input_size + 1))
            x = [0.5] * builtin.input_size
            a, b = classify(remote, x), classify(builtin, x)
            assert max(abs(p - q) for p, q in zip(a.scores, b.scores)) <= 1e-9


class TestHttpParity:
    def test_conformance_and_thousand_input_parity(self, weights_path, http_endpoint):
        builtin = load_builtin(weights_path)
        remote = connect_http(http_endpoint, timeout=30)
        try:
            assert remote.model_digest == builtin.model_digest
            assert remote.concurrency_safe
            rng = np.random.default_rng(2026)
            xs = rng.uniform(0, 1, (1000, builtin.input_size))
            local = classify_batch(builtin, xs)
            over_wire = classify_batch(remote, xs)
            worst = max(
                max(abs(a - b) for a, b in zip(lc.scores, rc.scores))
                for lc, rc in zip(local, over_wire)
            )
            assert worst <= 1e-9
        finally:
            remote.close()

    def test_stdio_and_http_numerics_identical(self, weights_path, http_endpoint):
        http_model = connect_http(http_endpoint, timeout=30)
        try:
            with connect_subprocess(["node", DIST_MAIN, "stdio", weights_path]) as stdio_model:
                rng = np.random.default_rng(2027)
                xs = rng.uniform(0, 1, (50, http_model.input_size))
                a = classify_batch(stdio_model, xs)
                b = classify_batch(http_model, xs)
                assert a == b
        finally:
            http_model.close()


def test_end_to_end_certification_through_ts_server(tmp_path):
    """The certifier consumes the TS server purely through the wire protocol."""
    from certbound import validate_spec
    from certbound.certify import run_certification
    from certbound.dataset import load_dataset
    from fixtures import domain_doc, image_record, spec_doc, write_jsonl_dataset

    weights = write_model(tmp_path / "probit.json", probit_net_1d(0.45, 0.55, 0.3, 0.004))
    dataset = load_dataset(
        write_jsonl_dataset(
            tmp_path / "d.jsonl",
            [image_record(f"p{i:02d}", [0.5, 0.5], (2,), 0) for i in range(12)],
        )
    )
    spec = validate_spec(
        spec_doc([domain_doc(epsilon=0.05, tau=0.32, sub_delta=0.3)],
                 delta=0.4, samples_per_point=16, points_per_category=10)
    )
    with connect_subprocess(["node", DIST_MAIN, "stdio", weights]) as model:
        cert = run_certification(spec, model, dataset)
        rerun = run_certification(spec, model, dataset)
    builtin = load_builtin(weights)
    local_cert = run_certification(spec, builtin, dataset)
    assert cert.verdict == local_cert.verdict
    assert cert.model_hash == local_cert.model_hash
    # the two evaluators agree to adapter tolerance, not to the last bit:
    # hashes are only reproducible within one implementation
    assert cert.p_total == pytest.approx(local_cert.p_total, abs=1e-6)
    assert rerun.content_hash == cert.content_hash
