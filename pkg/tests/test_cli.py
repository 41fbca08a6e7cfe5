import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsaclab.cli import main
from nsaclab.io import (ConfigError, MobilityConfig, PhysicalValidityError, RunManifest,
                        StudyConfig, config_from_dict, config_hash, parse_config, serialize_config,
                        tolerances, worker_count)
from nsaclab.potential import ViscosityModel
from nsaclab.reference import ReferenceScenario
from nsaclab.solver import InitialCondition, SimConfig


def _write(tmp_path, data, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, {"kind": "simulate"}))
    assert cfg == SimConfig()


def test_under_resolved_is_physical_error(tmp_path):
    with pytest.raises(PhysicalValidityError, match="h <= eps"):
        parse_config(_write(tmp_path, {"eps": 1 / 16, "nx": 8, "ny": 8}))


@pytest.mark.parametrize("data, path", [
    ({"nx": "64"}, "config.nx"),
    ({"init": {"radius": "big"}}, "config.init.radius"),
    ({"init": {"center": [0.5]}}, "config.init.center"),
    ({"viscosity": {"nu_plus": -1}}, "config.viscosity"),
    ({"colour": 1}, "config.colour"),
    ({"kind": "study", "base": {"eps": True}}, "config.base.eps"),
    ({"kind": "study", "scenario": {"kind": "cube"}}, "config.scenario.kind"),
    ({"kind": "banana"}, "config.kind"),
])
def test_schema_errors_name_the_field(tmp_path, data, path):
    with pytest.raises(ConfigError) as info:
        parse_config(_write(tmp_path, data))
    assert info.value.path == path


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        parse_config("/nonexistent/config.json")


_sim = st.builds(
    lambda n, eps, alpha, bnd, T, nu, R: SimConfig(
        nx=n, ny=n, eps=eps, alpha=alpha, boundary=bnd, T=T,
        viscosity=ViscosityModel(nu, 1.0), init=InitialCondition("circle", radius=R)),
    st.sampled_from([32, 64, 128]), st.sampled_from([1 / 16, 1 / 32]),
    st.sampled_from([0.0, 0.5, 1.0]), st.sampled_from(["periodic", "wall"]),
    st.floats(0, 1), st.floats(0.5, 2), st.floats(0.05, 0.4))


@settings(max_examples=40)
@given(_sim)
def test_roundtrip_simulate(cfg):
    assert config_from_dict(json.loads(serialize_config(cfg))) == cfg


def test_roundtrip_study_and_mobility():
    for cfg in (StudyConfig(eps_list=(0.1, 0.05), scenario=ReferenceScenario("transported_bubble",
                                                                              U=(1.0, 0.0))),
                MobilityConfig(alpha_list=(0.0, 1.0))):
        back = config_from_dict(json.loads(serialize_config(cfg)))
        assert back == cfg
        assert config_hash(back) == config_hash(cfg)


def test_tolerance_overrides():
    tol = tolerances('{"profile.newton": 1e-12}')
    assert tol["profile.newton"] == 1e-12
    with pytest.raises(ConfigError):
        tolerances({"bogus": 1})


def test_worker_count(monkeypatch):
    monkeypatch.setenv("NSACLAB_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("NSACLAB_WORKERS", "x")
    with pytest.raises(ConfigError):
        worker_count()


def test_manifest_lists_outputs(tmp_path):
    m = RunManifest(command="x")
    m.add(tmp_path / "a.csv")
    path = m.write(tmp_path)
    data = json.loads(path.read_text())
    assert data["outputs"][-1] == str(path) and str(tmp_path / "a.csv") in data["outputs"]


def test_usage_exit_codes(capsys):
    assert main([]) == 64
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 64


def test_profile_command(tmp_path, capsys):
    assert main(["profile", "--potential", "quartic", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    sigma = float(out.split("sigma = ")[1].split()[0])
    assert sigma == pytest.approx(2 / 3, abs=1e-6)
    data = np.loadtxt(tmp_path / "profile.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert all((p.endswith(".json") or p.endswith(".csv")) for p in man["outputs"])


def test_spectrum_command(tmp_path, capsys):
    assert main(["spectrum", "--eps", "1", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    lam0 = float(out.split("lambda0 = ")[1].split(",")[0])
    lam1 = float(out.split("lambda1 = ")[1].split()[0])
    assert abs(lam0) <= 1e-3 and lam1 == pytest.approx(0.75, abs=1e-2)


def test_potential_choice(tmp_path, capsys):
    assert main(["profile", "--potential", "sextic", "--output-dir", str(tmp_path)]) == 0
    alpha = float(capsys.readouterr().out.split("alpha = ")[1].split()[0])
    assert alpha == pytest.approx(np.sqrt(2), abs=1e-9)
    assert main(["profile", "--potential", "cubic"]) == 64
    cfg = config_from_dict({"potential": "sextic", "nx": 32, "ny": 32, "eps": 1 / 16})
    assert config_from_dict(json.loads(serialize_config(cfg))) == cfg
    with pytest.raises(ConfigError) as err:
        config_from_dict({"potential": "cubic"})
    assert err.value.path == "config.potential"


def test_simulate_validation_and_deterministic_output(tmp_path):
    bad = _write(tmp_path, {"eps": 1 / 16, "nx": 8, "ny": 8}, "bad.json")
    assert main(["simulate", str(bad), "--output-dir", str(tmp_path / "b")]) == 1
    good = _write(tmp_path, {"nx": 32, "ny": 32, "eps": 1 / 16, "T": 1e-3}, "good.json")
    for d in ("r1", "r2"):
        assert main(["simulate", str(good), "--output-dir", str(tmp_path / d)]) == 0
    for name in ("diagnostics.csv", "snapshot_0000.bin", "config.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    man = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    assert man["config_hash"] == config_hash(parse_config(good))
    for p in man["outputs"]:
        assert (tmp_path / "r1" / p.split("/")[-1]).exists()


def test_numerical_failure_exit_code(tmp_path):
    # the kappa-independent data family fails the H1-level flatness check
    assert main(["surfpde", "--family", "fixed", "--kappa", "1", "0.0625",
                 "--output-dir", str(tmp_path)]) == 2


def test_wrong_config_kind(tmp_path):
    p = _write(tmp_path, {"kind": "mobility"})
    assert main(["simulate", str(p), "--output-dir", str(tmp_path)]) == 1
