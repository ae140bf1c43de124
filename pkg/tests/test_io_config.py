import json

import numpy as np
import pytest
from pydantic import ValidationError

from membranepol import io
from membranepol.config import ConfigError, GridSpec, ModelSpec, RunConfig, load_config
from membranepol.media import VACUUM_PERMITTIVITY, MembraneModel


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_and_preset(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.model.build() == MembraneModel.typical()
    assert len(cfg.grid.build()) == 200


def test_model_overrides():
    m = ModelSpec(preset="typical", delta=1e-4, eps_m_relative=2.0).build()
    assert m.delta == 1e-4
    assert m.eps_m == pytest.approx(2.0 * VACUUM_PERMITTIVITY)
    with pytest.raises(ConfigError):
        ModelSpec(sigma0=1.0).build()
    with pytest.raises(ConfigError):
        ModelSpec(preset="typical", eps_m=1e-11, eps_m_relative=3.0).build()


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "model:\n  preset: typical\n  colour: red\n"))
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "gird: {}\n"))


def test_grid_validation():
    with pytest.raises(ConfigError):
        GridSpec(points=2).build()
    with pytest.raises(ValueError):
        GridSpec(omegas=[]).build()
    with pytest.raises(ValueError):
        GridSpec(omegas=[2.0, 1.0]).build()
    assert np.array_equal(GridSpec(omegas=[1.0, 3.0]).build().omegas, [1.0, 3.0])


def test_geometry_block(tmp_path):
    cfg = load_config(write(tmp_path, """
geometry:
  nodes: 32
  cells:
    - {kind: ellipse, a: 0.2, b: 0.1, center: [0.5, 0.5]}
"""))
    conf = cfg.geometry.build()
    assert conf.unit_cell and conf.f == pytest.approx(np.pi * 0.02, rel=1e-12)
    rescaled = cfg.geometry.boundaries()
    assert rescaled.area == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "geometry: {nodes: 48, cells: [{kind: circle, radius: 1}]}"))


def test_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "model: [unclosed"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "- 1\n- 2\n"))
    with pytest.raises(ConfigError):
        RunConfig().require("imaging")


def test_random_mode_needs_ensemble(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "effective: {mode: random}\n"))


def test_csv_and_json_are_stable():
    text = io.csv_text(["a", "b"], [[1, 0.1], [np.int64(2), np.float64(1 / 3)]])
    assert text == "a,b\n1,0.1\n2,0.3333333333333333\n"
    payload = {"z": np.float64(1.5), "a": np.array([1, 2]), "c": complex(1, 2),
               "n": float("nan")}
    text = io.json_text(payload)
    assert list(json.loads(text)) == ["a", "c", "n", "z"]
    assert json.loads(text)["n"] is None
    assert text == io.json_text(dict(reversed(list(payload.items()))))


def test_forward_csv_round_trip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(5, 2))
    u = np.random.default_rng(1).normal(size=5) + 1j * np.random.default_rng(2).normal(size=5)
    p = tmp_path / "u.csv"
    io.write_atomic(p, io.forward_csv(pts, u))
    pts2, u2 = io.read_forward_csv(p)
    assert np.array_equal(pts, pts2) and np.array_equal(u, u2)
    p.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        io.read_forward_csv(p)


def test_commit_leaves_no_temporaries(tmp_path):
    io.commit({"a.json": "{}\n", "sub/b.csv": "x\n1\n"}, tmp_path / "out")
    names = sorted(p.name for p in (tmp_path / "out").rglob("*"))
    assert names == ["a.json", "b.csv", "sub"]
