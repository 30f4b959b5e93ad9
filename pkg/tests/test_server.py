import json

import pytest

from main import app

M2 = {"num_states": 2, "num_actions": 1, "gamma": 0.5, "rho0": [1.0, 0.0],
      "transition": [[[0.0, 1.0]], [[1.0, 0.0]]], "reward": [[[0.0, 1.0]], [[0.0, 0.0]]]}


@pytest.fixture
def client():
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


def test_index(client):
    response = client.get("/")
    assert response.status_code == 200
    body = json.loads(response.data)
    assert body["name"] == "lambda_mdp"
    assert "objectives" in body["commands"]


def test_objectives(client):
    response = client.post("/run/objectives", json={"config": {"lam": 0.5}, "mdp": M2,
                                                    "phi": [0.3, -1.0]})
    assert response.status_code == 200
    body = json.loads(response.data)
    assert body["exit_code"] == 0
    assert body["results"][0]["j_general_form"] == pytest.approx(4.0 / 3.0)


def test_verify_without_a_model(client):
    response = client.post("/run/verify", json={"config": {"instances": 2, "workers": 1}})
    assert response.status_code == 200
    assert json.loads(response.data)["summary"]["passed"] == 2


def test_file_options_are_refused(client):
    response = client.post("/run/objectives", json={"config": {"mdp_path": "/etc/passwd"}})
    assert response.status_code == 400
    assert "mdp_path" in json.loads(response.data)["error"]


def test_invalid_model(client):
    broken = dict(M2, transition=[[[0.0, 0.9]], [[1.0, 0.0]]])
    response = client.post("/run/evaluate", json={"mdp": broken})
    assert response.status_code == 400
    body = json.loads(response.data)
    assert body["exit_code"] == 2
    assert "transition[0][0]" in body["error"]


def test_malformed_inputs(client):
    assert client.post("/run/evaluate", json=[1, 2]).status_code == 400
    assert client.post("/run/evaluate", json={"config": {"lam": "high"}, "mdp": M2}).status_code == 400
    assert client.post("/run/evaluate", json={"mdp": M2, "phi": ["a"]}).status_code == 400
    assert client.post("/run/nonsense", json={"mdp": M2}).status_code == 400
