import json
import math

import pytest

from gridcomm.network import BusKind
from gridcomm.network_io import NetworkFormatError, NetworkValidationError, load_network, save_network

from conftest import FIXTURES, two_bus


MINIMAL = {
    "s_base_mva": 1.0,
    "buses": [
        {"id": 0, "kind": "slack", "base_kv": 12.47},
        {"id": 1, "base_kv": 12.47, "p_load": 0.0, "q_load": 0.1},
    ],
    "branches": [{"from_bus": 0, "to_bus": 1, "r": 0.0, "x": 0.1}],
}


def write(tmp_path, payload, name="net.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_minimal_file_loads(tmp_path):
    net = load_network(write(tmp_path, MINIMAL))
    assert len(net.buses) == 2
    assert net.buses[0].kind is BusKind.SLACK
    assert net.buses[1].kind is BusKind.PQ
    assert net.buses[1].q_load == 0.1
    assert net.s_base == 1.0
    assert net.transformers == [] and net.dgs == []


def test_duplicate_bus_id_rejected_and_named(tmp_path):
    payload = json.loads(json.dumps(MINIMAL))
    payload["buses"].append({"id": 5, "base_kv": 12.47})
    payload["buses"].append({"id": 5, "base_kv": 12.47})
    payload["branches"].append({"from_bus": 1, "to_bus": 5, "r": 0.01, "x": 0.02})
    with pytest.raises(NetworkValidationError) as exc:
        load_network(write(tmp_path, payload))
    assert "5" in str(exc.value)


def test_net6_fixture_counts():
    net = load_network(FIXTURES / "net6.json")
    assert len(net.buses) == 6
    assert len(net.branches) == 7
    assert len(net.dgs) == 2


def test_round_trip_identity(tmp_path):
    net = two_bus(p=0.05, q=0.02, with_dg=True)
    net.buses[1].v_ang = -0.03
    net.transformers = []
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_network(net, first)
    loaded = load_network(first)
    save_network(loaded, second)
    assert first.read_text() == second.read_text()
    assert loaded == net


def test_angles_are_degrees_in_file_radians_in_memory(tmp_path):
    payload = json.loads(json.dumps(MINIMAL))
    payload["buses"][1]["v_ang"] = 90.0
    net = load_network(write(tmp_path, payload))
    assert net.buses[1].v_ang == pytest.approx(math.pi / 2, abs=1e-15)
    out = tmp_path / "back.json"
    save_network(net, out)
    raw = json.loads(out.read_text())
    assert raw["buses"][1]["v_ang"] == pytest.approx(90.0, abs=1e-12)


def test_missing_required_key_names_it(tmp_path):
    payload = json.loads(json.dumps(MINIMAL))
    del payload["branches"][0]["x"]
    with pytest.raises(NetworkFormatError) as exc:
        load_network(write(tmp_path, payload))
    assert "x" in str(exc.value)


def test_unknown_bus_kind_rejected(tmp_path):
    payload = json.loads(json.dumps(MINIMAL))
    payload["buses"][1]["kind"] = "pv"
    with pytest.raises(NetworkFormatError):
        load_network(write(tmp_path, payload))


def test_non_object_top_level_rejected(tmp_path):
    with pytest.raises(NetworkFormatError):
        load_network(write(tmp_path, [1, 2, 3]))


def test_transformer_phase_shift_degrees(tmp_path):
    payload = json.loads(json.dumps(MINIMAL))
    payload["buses"].append({"id": 2, "base_kv": 0.48})
    payload["transformers"] = [
        {"primary_bus": 1, "secondary_bus": 2, "r": 0.005, "x": 0.06, "phase_shift": 30.0}
    ]
    net = load_network(write(tmp_path, payload))
    assert net.transformers[0].phase_shift == pytest.approx(math.pi / 6, abs=1e-15)
