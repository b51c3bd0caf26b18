import numpy as np
import pytest
from fastapi.testclient import TestClient

from randersgeo.evolve import sample_landmarks
from randersgeo.fixtures import disk_fixture
from randersgeo.server import MAX_UPLOAD_BYTES, create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


def pgm_bytes(img):
    arr = np.clip(np.round(img.samples * 255), 0, 255).astype(np.uint8)
    h, w = arr.shape
    return f"P5\n{w} {h}\n255\n".encode() + arr.tobytes()


@pytest.fixture(scope="module")
def disk():
    img, gt, gtc = disk_fixture(size=160, radius=45, seed=2)
    lm = sample_landmarks(gtc, 3, seed=5)
    return img, gt, gtc, lm


def make_session(client, disk):
    img, gt, gtc, lm = disk
    r = client.post("/sessions", content=pgm_bytes(img))
    assert r.status_code == 201
    sid = r.json()["id"]
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": lm.points.tolist()})
    assert r.status_code == 200
    return sid


def test_upload_and_stage(client, disk):
    img = disk[0]
    r = client.post("/sessions", content=pgm_bytes(img))
    assert r.status_code == 201
    body = r.json()
    assert body["v"] == 1 and body["stage"] == "new"
    assert body["width"] == 160 and body["height"] == 160


def test_upload_rejects_garbage(client):
    assert client.post("/sessions", content=b"not an image").status_code \
        == 415


def test_upload_rejects_oversize(client):
    big = b"P5 " + b"0" * (MAX_UPLOAD_BYTES + 1)
    assert client.post("/sessions", content=big).status_code == 413


def test_duplicate_upload_independent_sessions(client, disk):
    img = disk[0]
    a = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    b = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    assert a != b


def test_landmarks_out_of_bounds_422(client, disk):
    img = disk[0]
    sid = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": [[500.0, 10.0], [20.0, 20.0]]})
    assert r.status_code == 422


def test_landmarks_too_close_422(client, disk):
    img = disk[0]
    sid = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": [[20.0, 20.0], [20.5, 20.5],
                                            [60.0, 60.0]]})
    assert r.status_code == 422


def test_landmark_order_reversal_handled(client, disk):
    img, gt, gtc, lm = disk
    sid = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    cw_points = lm.points[::-1].tolist()  # clockwise click order
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": cw_points})
    assert r.status_code == 200
    pts = np.asarray(r.json()["contour"]["points"])
    # re-oriented counter-clockwise: positive signed area
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area > 0


def test_step_and_artifacts_flow(client, disk):
    sid = make_session(client, disk)
    # mask before any step: the rasterized initial contour
    r0 = client.get(f"/sessions/{sid}/artifacts/mask.pgm")
    assert r0.status_code == 200 and r0.content[:2] == b"P5"
    r = client.post(f"/sessions/{sid}/step?n=1")
    assert r.status_code == 200
    body = r.json()
    assert body["iteration"] == 1 and body["stage"] == "evolving"
    csv1 = client.get(f"/sessions/{sid}/artifacts/energy.csv").content
    assert len(csv1.splitlines()) == 2  # header + one row
    r = client.post(f"/sessions/{sid}/step?n=1")
    csv2 = client.get(f"/sessions/{sid}/artifacts/energy.csv").content
    assert len(csv2.splitlines()) == 3
    for kind in ("contour.json", "tube.pgm", "xi.rsf1", "omega.rsf1"):
        assert client.get(
            f"/sessions/{sid}/artifacts/{kind}").status_code == 200


def test_step_n0_noop(client, disk):
    sid = make_session(client, disk)
    r = client.post(f"/sessions/{sid}/step?n=0")
    assert r.status_code == 200
    assert r.json()["iteration"] == 0
    assert r.json()["stage"] == "initialized"


def test_step_until_converged_then_409(client, disk):
    sid = make_session(client, disk)
    r = client.post(f"/sessions/{sid}/step?n=100")
    assert r.status_code == 200
    assert r.json()["converged"] is True
    r = client.post(f"/sessions/{sid}/step?n=1")
    assert r.status_code == 409


def test_concurrent_step_409(client, disk):
    sid = make_session(client, disk)
    app = client.app
    session = app.state.sessions[sid]
    assert session.step_lock.acquire(blocking=False)
    try:
        r = client.post(f"/sessions/{sid}/step?n=1")
        assert r.status_code == 409
    finally:
        session.step_lock.release()


def test_idempotent_reads(client, disk):
    sid = make_session(client, disk)
    client.post(f"/sessions/{sid}/step?n=1")
    a = client.get(f"/sessions/{sid}/artifacts/mask.pgm").content
    b = client.get(f"/sessions/{sid}/artifacts/mask.pgm").content
    assert a == b


def test_unknown_artifact_404(client, disk):
    sid = make_session(client, disk)
    assert client.get(
        f"/sessions/{sid}/artifacts/bogus.bin").status_code == 404


def test_unknown_session_404(client):
    assert client.post("/sessions/nope/step").status_code == 404
    assert client.get("/sessions/nope/artifacts/mask.pgm").status_code == 404


def test_step_error_is_atomic(client, disk, monkeypatch):
    sid = make_session(client, disk)
    app = client.app
    session = app.state.sessions[sid]
    client.post(f"/sessions/{sid}/step?n=1")
    before = session.driver.state.iteration

    from randersgeo.errors import EvolutionError

    def boom(self):
        raise EvolutionError("synthetic failure")

    monkeypatch.setattr(type(session.driver), "step", boom)
    r = client.post(f"/sessions/{sid}/step?n=1")
    assert r.status_code == 500
    assert session.stage == "error"
    assert session.driver.state.iteration == before  # pre-step snapshot
    monkeypatch.undo()
    # landmark edit resumes from initialized
    img, gt, gtc, lm = disk
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": lm.points.tolist()})
    assert r.status_code == 200
    assert session.stage == "initialized"
    assert client.post(f"/sessions/{sid}/step?n=1").status_code == 200


def test_landmark_edit_after_convergence_reinitializes(client, disk):
    img, gt, gtc, lm = disk
    sid = make_session(client, disk)
    r = client.post(f"/sessions/{sid}/step?n=100")
    assert r.json()["converged"] is True
    shifted = lm.points + np.array([2.5, 0.0])
    r = client.put(f"/sessions/{sid}/landmarks",
                   json={"v": 1, "points": shifted.tolist()})
    assert r.status_code == 200
    assert r.json()["stage"] == "initialized"
    assert client.post(f"/sessions/{sid}/step?n=1").status_code == 200


def test_persistence_roundtrip(tmp_path, disk):
    img, gt, gtc, lm = disk
    app1 = create_app(persist_dir=tmp_path)
    c1 = TestClient(app1)
    sid = c1.post("/sessions", content=pgm_bytes(img)).json()["id"]
    c1.put(f"/sessions/{sid}/landmarks",
           json={"v": 1, "points": lm.points.tolist()})
    c1.post(f"/sessions/{sid}/step?n=2")
    mask_before = c1.get(f"/sessions/{sid}/artifacts/mask.pgm").content
    # a fresh server instance restores the session from disk
    app2 = create_app(persist_dir=tmp_path)
    c2 = TestClient(app2)
    r = c2.get(f"/sessions/{sid}/artifacts/mask.pgm")
    assert r.status_code == 200
    assert r.content == mask_before
    r = c2.post(f"/sessions/{sid}/step?n=1")
    assert r.status_code == 200
    assert r.json()["iteration"] == 3


def test_config_endpoint(client, disk):
    img = disk[0]
    sid = client.post("/sessions", content=pgm_bytes(img)).json()["id"]
    r = client.put(f"/sessions/{sid}/config",
                   json={"v": 1, "model": "bhattacharyya"})
    assert r.status_code == 200
    assert r.json()["config"]["model"] == "bhattacharyya"
    r = client.put(f"/sessions/{sid}/config", json={"v": 1, "model": "nope"})
    assert r.status_code == 422
