from __future__ import annotations

import json
import threading
from pathlib import Path

import cv2
import numpy as np
import pytest
from fastapi.testclient import TestClient

from slidetrans.frames import read_frame
from slidetrans.pipeline import RunConfig, detect_video
from slidetrans.records import write_detections
from slidetrans.server import create_app, scan_corpus
from slidetrans.synth import SceneSpec, SyntheticScript, TransitionOut, synthesize_video


def _script(seed: int) -> SyntheticScript:
    return SyntheticScript(
        seed=seed,
        width=200,
        height=120,
        fps=25.0,
        noise_sigma=1.0,
        scenes=[
            SceneSpec("slide", 30, TransitionOut("hard")),
            SceneSpec("slide", 30, None),
        ],
    )


@pytest.fixture(scope="module")
def review_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("review")
    synthesize_video(_script(11), root, "vid_a", fmt="png")
    synthesize_video(_script(12), root, "vid_b", fmt="png")
    doc = detect_video(RunConfig(source=root / "vid_a", pair_backend="oracle",
                                 clip_backend="oracle"))
    write_detections(root / "vid_a" / "detections.json", doc)
    # A corrupt entry: frames present but the sidecar does not parse.
    corrupt = root / "vid_broken"
    corrupt.mkdir()
    cv2.imwrite(str(corrupt / "00000000.png"), np.zeros((16, 16, 3), dtype=np.uint8))
    (corrupt / "sidecar.json").write_text("{not json", encoding="utf-8")
    (root / "stray.txt").write_text("ignored", encoding="utf-8")
    (root / "empty_dir").mkdir()
    return root


@pytest.fixture(scope="module")
def client(review_root: Path) -> TestClient:
    return TestClient(create_app(review_root))


def all_files(root: Path) -> list[str]:
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


def test_corrupt_entries_are_skipped(review_root: Path) -> None:
    entries = scan_corpus(review_root)
    assert sorted(entries) == ["vid_a", "vid_b"]


def test_list_videos(client: TestClient) -> None:
    videos = client.get("/api/videos").json()
    assert [v["id"] for v in videos] == ["vid_a", "vid_b"]
    assert all(v["frame_count"] == 60 and v["fps"] == 25.0 for v in videos)


def test_video_detail_and_unknown(client: TestClient) -> None:
    detail = client.get("/api/videos/vid_a").json()
    assert detail["has_detections"] is True
    assert detail["has_ground_truth"] is True
    assert detail["has_annotations"] is False
    assert detail["crop"] is None
    resp = client.get("/api/videos/vid_broken")
    assert resp.status_code == 404
    assert "unknown video" in resp.json()["detail"]


def test_frame_endpoint_serves_exact_pixels(client: TestClient, review_root: Path) -> None:
    resp = client.get("/api/videos/vid_a/frames/0")
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    decoded = cv2.imdecode(np.frombuffer(resp.content, dtype=np.uint8), cv2.IMREAD_COLOR)
    rgb = cv2.cvtColor(decoded, cv2.COLOR_BGR2RGB)
    expected = read_frame(review_root / "vid_a", 0).data
    assert np.array_equal(rgb, expected)
    # Second hit comes from the cache and must be byte-identical.
    assert client.get("/api/videos/vid_a/frames/0").content == resp.content


def test_frame_out_of_range(client: TestClient) -> None:
    assert client.get("/api/videos/vid_a/frames/60").status_code == 404
    assert client.get("/api/videos/vid_a/frames/-1").status_code == 404


def test_detections_endpoint(client: TestClient) -> None:
    doc = client.get("/api/videos/vid_a/detections").json()
    assert doc["video"] == "vid_a"
    assert len(doc["transitions"]) == 1
    resp = client.get("/api/videos/vid_b/detections")
    assert resp.status_code == 404
    assert "no detections" in resp.json()["detail"]


def test_gets_do_not_write(client: TestClient, review_root: Path) -> None:
    before = all_files(review_root)
    client.get("/api/videos")
    client.get("/api/videos/vid_a")
    client.get("/api/videos/vid_a/frames/3")
    client.get("/api/videos/vid_a/detections")
    client.get("/api/videos/vid_a/annotations")
    assert all_files(review_root) == before


def test_annotations_put_round_trip(client: TestClient, review_root: Path) -> None:
    assert client.get("/api/videos/vid_b/annotations").status_code == 404
    payload = json.loads((review_root / "vid_b" / "ground_truth.json")
                         .read_text(encoding="utf-8"))
    payload["review_state"] = {"accepted": [0], "note": "kept as detected"}
    resp = client.put("/api/videos/vid_b/annotations", json=payload)
    assert resp.status_code == 200
    assert resp.json() == {"ok": True, "transitions": 1}
    echoed = client.get("/api/videos/vid_b/annotations").json()
    assert echoed == payload
    assert echoed["review_state"]["accepted"] == [0]
    assert client.get("/api/videos/vid_b").json()["has_annotations"] is True


def test_put_rejects_malformed_json(client: TestClient) -> None:
    resp = client.put("/api/videos/vid_a/annotations", content=b"{oops",
                      headers={"content-type": "application/json"})
    assert resp.status_code == 422
    assert "not valid JSON" in resp.json()["detail"]


def test_put_rejects_schema_violations_with_field(client: TestClient,
                                                  review_root: Path) -> None:
    payload = json.loads((review_root / "vid_a" / "ground_truth.json")
                         .read_text(encoding="utf-8"))
    del payload["frame_count"]
    resp = client.put("/api/videos/vid_a/annotations", json=payload)
    assert resp.status_code == 422
    assert resp.json()["field"] == "frame_count"


def test_put_rejects_video_id_mismatch(client: TestClient, review_root: Path) -> None:
    payload = json.loads((review_root / "vid_a" / "ground_truth.json")
                         .read_text(encoding="utf-8"))
    payload["video"] = "someone_else"
    resp = client.put("/api/videos/vid_a/annotations", json=payload)
    assert resp.status_code == 422
    assert resp.json()["field"] == "video"
    assert "someone_else" in resp.json()["detail"]


def test_failed_put_leaves_disk_untouched(client: TestClient, review_root: Path) -> None:
    target = review_root / "vid_b" / "annotations.json"
    original = target.read_text(encoding="utf-8")
    bad = json.loads(original)
    bad["frame_count"] = "sixty"
    assert client.put("/api/videos/vid_b/annotations", json=bad).status_code == 422
    assert target.read_text(encoding="utf-8") == original
    assert not list((review_root / "vid_b").glob(".annotations.*"))


def test_concurrent_puts_end_in_a_consistent_document(client: TestClient,
                                                      review_root: Path) -> None:
    base = json.loads((review_root / "vid_a" / "ground_truth.json")
                      .read_text(encoding="utf-8"))
    payloads = []
    for tag in range(6):
        doc = json.loads(json.dumps(base))
        doc["review_state"] = {"writer": tag}
        payloads.append(doc)
    statuses: list[int] = []

    def put(doc: dict) -> None:
        statuses.append(client.put("/api/videos/vid_a/annotations", json=doc).status_code)

    threads = [threading.Thread(target=put, args=(p,)) for p in payloads]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert statuses == [200] * 6
    final = json.loads((review_root / "vid_a" / "annotations.json")
                       .read_text(encoding="utf-8"))
    assert final["review_state"]["writer"] in range(6)
    assert not list((review_root / "vid_a").glob(".annotations.*"))


def test_plain_index_without_ui(client: TestClient) -> None:
    resp = client.get("/")
    assert resp.status_code == 200
    assert "REST API is live" in resp.text
    assert "vid_a" in resp.text


def test_static_ui_mount(review_root: Path, tmp_path: Path) -> None:
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>review-ui-shell</body></html>",
                                   encoding="utf-8")
    ui_client = TestClient(create_app(review_root, ui_dir=ui))
    resp = ui_client.get("/")
    assert resp.status_code == 200
    assert "review-ui-shell" in resp.text
    # The API stays reachable under the mount.
    assert ui_client.get("/api/videos").status_code == 200
