"""HTTP session service: lifecycle, payload shapes, error mapping."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from emogen import session_io
from emogen.service import create_app


@pytest.fixture(scope="module")
def client(rig):
    app = create_app(rigs={"default": rig, rig.rig_id: rig})
    with TestClient(app) as c:
        yield c


def _new_session(client, **payload):
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 201, resp.text
    return resp.json()


# -- rigs and session creation ---------------------------------------------------

def test_list_rigs(client, rig):
    resp = client.get("/rigs")
    assert resp.status_code == 200
    assert resp.json()["rigs"] == sorted(["default", rig.rig_id])


def test_create_session_defaults(client, rig):
    out = _new_session(client)
    assert out["state"] == "awaiting-selection"
    assert out["generation"] == 0
    assert out["bounds"] == [1, 10]
    assert out["rig_id"] == rig.rig_id
    assert out["config"]["generations"] == out["generations"]


def test_create_session_echoes_config(client):
    out = _new_session(client, ga={"generations": 2, "seed": 99},
                       selection_bounds=[2, 4])
    assert out["generations"] == 2
    assert out["config"]["seed"] == 99
    assert out["bounds"] == [2, 4]


def test_create_session_rejects_bad_config(client):
    resp = client.post("/sessions", json={"ga": {"generations": -1}})
    assert resp.status_code == 400
    resp = client.post("/sessions", json={"ga": {"init_mode": "bogus"}})
    assert resp.status_code == 400


def test_create_session_rejects_bad_bounds(client):
    for bounds in ([0, 5], [5, 3], [1, 11], "xx", [7]):
        resp = client.post("/sessions", json={"selection_bounds": bounds})
        assert resp.status_code == 400, bounds


def test_create_session_unknown_rig(client):
    resp = client.post("/sessions", json={"rig": "granite-statue"})
    assert resp.status_code == 404


def test_create_session_fixed_members(client, rig):
    members = (0.25 * np.ones((10, rig.n_shapes))).tolist()
    out = _new_session(client, ga={"generations": 1, "init_mode": "fixed"},
                       fixed_members=members)
    pop = client.get(f"/sessions/{out['session_id']}/population").json()
    assert all(t == "init" for t in (f["tag"] for f in pop["faces"]))
    resp = client.post("/sessions", json={
        "ga": {"init_mode": "fixed"}, "fixed_members": [[0.1, 0.2]]})
    assert resp.status_code == 400  # wrong member matrix shape


def test_unknown_session_everywhere(client):
    assert client.get("/sessions/zzz/population").status_code == 404
    assert client.post("/sessions/zzz/selection", json={"generation": 0, "elite": 0}).status_code == 404
    assert client.get("/sessions/zzz/log").status_code == 404


# -- population payload ------------------------------------------------------------

def test_population_payload(client, rig):
    out = _new_session(client, ga={"generations": 1, "seed": 7})
    pop = client.get(f"/sessions/{out['session_id']}/population").json()
    assert pop["generation"] == 0
    assert pop["bounds"] == [1, 10]
    assert np.array_equal(pop["topology"]["faces"], rig.faces)
    assert len(pop["faces"]) == 10
    for i, face in enumerate(pop["faces"]):
        assert face["index"] == i
        assert set(face) >= {"weights", "vertices", "tag", "corrected", "resolved"}
        weights = np.asarray(face["weights"], dtype=float)
        assert weights.shape == (rig.n_shapes,)
        # vertices are exactly the local evaluation of the returned weights
        assert np.array_equal(np.asarray(face["vertices"]), rig.evaluate(weights).vertices)
        assert isinstance(face["corrected"], bool) and isinstance(face["resolved"], bool)
    assert pop["faces"][-1]["tag"] == "init"


# -- selection validation -------------------------------------------------------------

def test_selection_requires_generation_field(client):
    out = _new_session(client)
    resp = client.post(f"/sessions/{out['session_id']}/selection", json={"elite": 0})
    assert resp.status_code == 422
    assert "generation" in resp.json()["detail"]


def test_selection_generation_mismatch(client):
    out = _new_session(client)
    resp = client.post(f"/sessions/{out['session_id']}/selection",
                       json={"generation": 5, "elite": 0})
    assert resp.status_code == 409


def test_selection_malformed(client):
    out = _new_session(client)
    sid = out["session_id"]
    assert client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0}).status_code == 422  # no elite
    assert client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": "x"}).status_code == 422
    assert client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": 0, "others": ["y"]}).status_code == 422


def test_selection_count_bounds(client):
    out = _new_session(client, selection_bounds=[2, 3])
    sid = out["session_id"]
    resp = client.post(f"/sessions/{sid}/selection", json={"generation": 0, "elite": 0})
    assert resp.status_code == 422  # one pick, lower bound is two
    resp = client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": 0, "others": [1, 2, 3]})
    assert resp.status_code == 422  # four picks, upper bound is three


def test_selection_validation_errors(client):
    out = _new_session(client)
    sid = out["session_id"]
    resp = client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": 1, "others": [1]})
    assert resp.status_code == 422  # elite duplicated in others
    resp = client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": 99})
    assert resp.status_code == 422  # index out of range


# -- full session and log --------------------------------------------------------------

def test_full_session_and_log_replay(client, rig):
    out = _new_session(client, ga={"generations": 2, "seed": 13})
    sid = out["session_id"]
    for gen in range(3):
        pop = client.get(f"/sessions/{sid}/population").json()
        assert pop["generation"] == gen
        resp = client.post(f"/sessions/{sid}/selection",
                           json={"generation": gen, "elite": 1, "others": [2, 4]})
        assert resp.status_code == 200, resp.text
        out = resp.json()
    assert out["state"] == "finished"
    assert out["log_ref"] == f"/sessions/{sid}/log"
    final = np.asarray(out["final_elite"], dtype=float)
    assert final.shape == (rig.n_shapes,)

    doc = client.get(f"/sessions/{sid}/log").json()
    assert doc["schema"] == "sessionlog/1"
    log = session_io.log_from_dict(doc)
    assert len(log.populations) == 3 and len(log.selections) == 3
    assert np.array_equal(log.final_elite, final)
    # the log alone reproduces the session bit-exactly
    again = session_io.replay_from_log(rig, log)
    assert np.array_equal(again.final_elite, final)
    for pa, pb in zip(log.populations, again.populations):
        assert np.array_equal(pa.members, pb.members)


def test_finished_session_rejects_further_input(client):
    out = _new_session(client, ga={"generations": 0, "seed": 3})
    sid = out["session_id"]
    resp = client.post(f"/sessions/{sid}/selection", json={"generation": 0, "elite": 2})
    assert resp.status_code == 200 and resp.json()["state"] == "finished"
    assert client.post(f"/sessions/{sid}/selection",
                       json={"generation": 0, "elite": 2}).status_code == 409
    assert client.get(f"/sessions/{sid}/population").status_code == 409


def test_log_available_mid_session(client):
    out = _new_session(client, ga={"generations": 3, "seed": 5})
    sid = out["session_id"]
    client.post(f"/sessions/{sid}/selection", json={"generation": 0, "elite": 0})
    doc = client.get(f"/sessions/{sid}/log").json()
    assert len(doc["populations"]) == 2
    assert doc["final_elite"] is None


def test_cors_allows_browser_origins(client):
    resp = client.get("/rigs", headers={"Origin": "http://localhost:5173"})
    assert resp.headers.get("access-control-allow-origin") == "*"
