import json
import re

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wittenlab.config import (ExperimentConfig, PRESETS, Tolerances, preset,
                              load_schema)
from wittenlab.errors import ConfigError


def test_digest_is_stable_hex():
    a = ExperimentConfig()
    b = ExperimentConfig()
    assert a.digest() == b.digest()
    assert re.fullmatch(r"[0-9a-f]{16}", a.digest())
    assert a.replace(modes=16).digest() != a.digest()
    assert a.replace(tolerances=Tolerances(vanish_max=1e-4)).digest() != a.digest()


def test_dict_round_trip():
    cfg = preset("torus-sin2-product").replace(seed=7, k_extra=3)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.as_dict())))
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_json_file_round_trip(tmp_path):
    cfg = preset("circle-sin2")
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.as_dict()))
    assert ExperimentConfig.from_json(str(p)) == cfg
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(str(bad))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(str(tmp_path / "missing.json"))


def test_validation_rejects_bad_values():
    with pytest.raises(ConfigError):
        ExperimentConfig(manifold="sphere")
    with pytest.raises(ConfigError):
        ExperimentConfig(modes=1)
    with pytest.raises(ConfigError):
        ExperimentConfig(modes=200)
    with pytest.raises(ConfigError):
        ExperimentConfig(t_step=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(t_step=2.0, t_max=1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(k_extra=-1)
    with pytest.raises(ConfigError):
        ExperimentConfig(format="yaml")
    with pytest.raises(ConfigError):
        ExperimentConfig(degrees=(0, 5))
    # arity mismatch surfaces when the potential is materialized
    with pytest.raises(ConfigError):
        ExperimentConfig(manifold="torus", potential="sin2").potential_trigpoly()
    with pytest.raises(ConfigError):
        ExperimentConfig(potential="sin3").potential_trigpoly()


def test_from_dict_rejects_unknown_keys():
    d = ExperimentConfig().as_dict()
    d["extra"] = 1
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d)
    d2 = ExperimentConfig().as_dict()
    d2["tolerances"]["bogus"] = 0.5
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d2)
    d3 = ExperimentConfig().as_dict()
    d3["tolerances"]["vanish_max"] = -1.0
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d3)


def test_potential_document_round_trip():
    doc = {"arity": 1, "terms": [{"freq": [2], "cos": 0.0, "sin": 1.0}]}
    cfg = ExperimentConfig(potential=doc)
    f = cfg.potential_trigpoly()
    assert f.arity == 1 and f.max_freq() == (2,)
    th = np.linspace(0.0, 6.0, 13)
    ref = ExperimentConfig().potential_trigpoly()
    assert np.allclose([f(x) for x in th], [ref(x) for x in th], atol=1e-15)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"potential": {"arity": 1}})


def test_presets():
    assert set(PRESETS) == {"circle-sin2", "torus-sin2-product"}
    c = preset("circle-sin2")
    assert (c.manifold, c.modes, c.t_max, c.t_step) == ("circle", 32, 15.0, 0.25)
    t = preset("torus-sin2-product")
    assert (t.manifold, t.modes, t.t_max) == ("torus", 12, 5.0)
    # the coarse torus cutoff needs the looser vanish ceiling
    assert t.tolerances.vanish_max == pytest.approx(1e-4)
    with pytest.raises(ConfigError):
        preset("klein-bottle")


@given(st.floats(0.05, 3.0), st.floats(0.01, 1.0))
def test_grid_properties(t_max, t_step):
    t_step = min(t_step, t_max)
    cfg = ExperimentConfig(t_max=t_max, t_step=t_step)
    ts = cfg.grid()
    assert ts[0] == 0.0
    assert ts[-1] == pytest.approx(t_max, abs=1e-12)
    assert np.all(np.diff(ts) > 0)
    assert np.max(np.diff(ts)) <= t_step * (1 + 1e-9)


def test_schema_loads():
    for name in ("experiment-config", "spectral-package", "torsion-report"):
        sch = load_schema(name)
        assert sch.get("$schema", "").startswith("http")
    with pytest.raises(FileNotFoundError):
        load_schema("no-such-schema")


def test_tolerances_replace_and_round_trip():
    tol = Tolerances().replace(vanish_max=1e-4)
    assert tol.vanish_max == 1e-4
    assert Tolerances.from_dict(tol.as_dict()) == tol
    with pytest.raises(ConfigError):
        Tolerances.from_dict({"nope": 1.0})
