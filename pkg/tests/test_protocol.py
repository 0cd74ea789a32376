import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from scartrack.errors import BackendUnavailableError, ProtocolError
from scartrack.protocol import (
    HttpBackend,
    create_backend_app,
    decode_segment_request,
    encode_segment_request,
    run_compliance_checks,
)
from scartrack.raster import BinaryMask, mask_from_bytes, mask_to_bytes
from scartrack.synthetic import growing_scar_sequence
from scartrack.tracker import (
    NativeBackend,
    PromptPoint,
    SegmentResult,
    TrackerParams,
    init_session,
    propagate,
)


@pytest.fixture()
def client():
    return TestClient(create_backend_app())


class TestNativeBackendOverWire:
    def test_compliance_suite_passes(self, client):
        passed = run_compliance_checks(client)
        assert "accepts-valid-request" in passed and len(passed) >= 10

    def test_wire_equals_in_process_byte_identical(self, client):
        seq, _ = growing_scar_sequence(n_frames=5, size=48, start_cells=40, end_cells=260)
        prompts = [PromptPoint(0, 24, 24, "positive"), PromptPoint(0, 4, 4, "negative")]

        native = init_session(seq, TrackerParams(), list(prompts))
        propagate(native, 1)

        wired = init_session(seq, TrackerParams(), list(prompts),
                             backend=HttpBackend(client=client))
        propagate(wired, 1)

        assert len(native.masks) == len(wired.masks)
        for a, b in zip(native.masks, wired.masks):
            assert mask_to_bytes(a) == mask_to_bytes(b)
        assert all(c == 1.0 for c in wired.confidences)

    def test_request_round_trip(self):
        seq, _ = growing_scar_sequence(n_frames=2, size=16, start_cells=10, end_cells=30)
        prompts = [PromptPoint(0, 8, 8, "positive"), PromptPoint(1, 2, 2, "negative")]
        prev = BinaryMask.from_bits(np.zeros((16, 16), dtype=bool), cell_size=10.0)
        body = encode_segment_request(seq[1], 1, prompts, prev, TrackerParams(threshold=0.2))
        frame, idx, decoded_prompts, decoded_prev, params = decode_segment_request(body)
        assert idx == 1
        assert np.array_equal(frame.grid.values, seq[1].grid.values)
        assert decoded_prompts == prompts
        assert decoded_prev is not None and decoded_prev.count == 0
        assert params.threshold == 0.2

    def test_prompt_history_is_filtered_per_frame(self, client):
        # a prompt registered at frame 0 must not leak into frame 1 when the
        # request carries the full history
        seq, _ = growing_scar_sequence(n_frames=2, size=32, start_cells=30, end_cells=60)
        prompts = [PromptPoint(0, 16, 16, "positive")]
        body = encode_segment_request(seq[1], 1, prompts, None, TrackerParams())
        r = client.post("/segment", json=body)
        mask = mask_from_bytes(base64.b64decode(r.json()["mask_b64"]))
        assert mask.count == 0  # no prompts at frame 1, no previous mask

    def test_echo_backend_keeps_masks_constant(self):
        class EchoBackend:
            name = "echo"

            def segment(self, frame, frame_index, history, prev, params):
                g = frame.grid
                if prev is None:
                    bits = np.zeros((g.height, g.width), dtype=bool)
                    bits[0, 0] = True
                    prev = BinaryMask(g.width, g.height, g.cell_size, bits)
                return SegmentResult(mask=prev, confidence=0.5, warnings=[])

        client = TestClient(create_backend_app(EchoBackend()))
        seq, _ = growing_scar_sequence(n_frames=4, size=16, start_cells=10, end_cells=40)
        backend = HttpBackend(client=client)
        first = backend.segment(seq[0], 0, [], None, TrackerParams())
        masks = [first.mask]
        for t in range(1, 4):
            masks.append(backend.segment(seq[t], t, [], masks[-1], TrackerParams()).mask)
        payloads = {mask_to_bytes(m) for m in masks}
        assert len(payloads) == 1

    def test_wrong_dimension_response_is_protocol_error(self):
        class LyingBackend:
            name = "liar"

            def segment(self, frame, frame_index, history, prev, params):
                bits = np.zeros((2, 2), dtype=bool)
                return SegmentResult(mask=BinaryMask.from_bits(bits), confidence=1.0)

        client = TestClient(create_backend_app(LyingBackend()))
        seq, _ = growing_scar_sequence(n_frames=1, size=16, start_cells=10, end_cells=10)
        backend = HttpBackend(client=client)
        with pytest.raises(ProtocolError, match="2x2"):
            backend.segment(seq[0], 0, [], None, TrackerParams())

    def test_unreachable_backend_maps_to_unavailable(self):
        backend = HttpBackend(base_url="http://127.0.0.1:9", timeout=0.2)
        seq, _ = growing_scar_sequence(n_frames=1, size=8, start_cells=4, end_cells=4)
        with pytest.raises(BackendUnavailableError):
            backend.segment(seq[0], 0, [], None, TrackerParams())

    def test_decode_rejects_dimension_lie(self):
        seq, _ = growing_scar_sequence(n_frames=1, size=8, start_cells=4, end_cells=4)
        body = encode_segment_request(seq[0], 0, [], None, TrackerParams())
        body["frame"]["height"] = 3
        with pytest.raises(ProtocolError):
            decode_segment_request(body)

    def test_frame_by_path_reference(self, tmp_path, client):
        from scartrack.raster import write_grid

        seq, _ = growing_scar_sequence(n_frames=1, size=16, start_cells=20, end_cells=20)
        write_grid(seq[0].grid, tmp_path / "f.asc")
        body = encode_segment_request(seq[0], 0, [PromptPoint(0, 8, 8, "positive")],
                                      None, TrackerParams())
        del body["frame"]["ndvi_b64"]
        body["frame"]["path"] = str(tmp_path / "f.asc")
        r = client.post("/segment", json=body)
        assert r.status_code == 200
        mask = mask_from_bytes(base64.b64decode(r.json()["mask_b64"]))
        direct = NativeBackend().segment(seq[0], 0, [PromptPoint(0, 8, 8, "positive")],
                                         None, TrackerParams())
        assert mask_to_bytes(mask) == mask_to_bytes(direct.mask)
