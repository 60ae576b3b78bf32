from __future__ import annotations

from math import pi

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esfrlab.config import ConfigError, RunConfig, load_config, parse_config
from esfrlab.report import fmt, read_csv, render_csv

configs = st.builds(
    RunConfig,
    p=st.integers(2, 5),
    c=st.sampled_from(["DG", "SD", "HU", "PLUS", "0.01"]),
    kappa=st.sampled_from(["DG", "PLUS", "1e5"]),
    flux=st.sampled_from(["ip", "br2", "ldg"]),
    tau=st.one_of(st.none(), st.floats(0, 100)),
    tau_mult=st.floats(0.5, 3),
    elements=st.integers(2, 256),
    meshes=st.lists(st.integers(2, 512), min_size=1, max_size=4).map(tuple),
    t_final=st.floats(0.01, 10),
    seed=st.one_of(st.none(), st.floats(-50, 50)),
    tau_mults=st.lists(st.floats(0.5, 3), min_size=1, max_size=3).map(tuple),
    ldg_column=st.booleans(),
    x_max=st.floats(1, 20),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_round_trip(cfg):
    back = parse_config(cfg.to_text())
    assert back == cfg
    assert back.to_text() == cfg.to_text()


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.p == 2 and cfg.x_max == pytest.approx(2 * pi)
    assert parse_config("") == RunConfig()


def test_parse_values():
    cfg = parse_config(
        "[scheme]\np = 3\nc = HU  # comment\ntau =\n[mesh]\nx_max = 2pi\nmeshes = 16, 32\n"
        "[sweep]\nldg_column = yes\n"
    )
    assert cfg.p == 3 and cfg.c == "HU" and cfg.tau is None
    assert cfg.x_max == pytest.approx(2 * pi) and cfg.meshes == (16, 32)
    assert cfg.ldg_column is True
    assert parse_config("[mesh]\nx_min = 0.5*pi").x_min == pytest.approx(pi / 2)


@pytest.mark.parametrize("text,needle", [
    ("[scheme]\np = two\n", "<config>:2"),
    ("[scheme]\nwidth = 3\n", "unknown key"),
    ("[mesh]\np = 3\n", "unknown key"),
    ("[nope]\n", "unknown section"),
    ("p = 3\n", "<config>"),
    ("[sweep]\nldg_column = maybe\n", "ldg_column"),
])
def test_parse_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


@pytest.mark.parametrize("changes,key", [
    ({"p": 0}, "p"),
    ({"c": "bogus"}, "c"),
    ({"flux": "central"}, "flux"),
    ({"nodes": "cheb"}, "nodes"),
    ({"elements": 1}, "elements"),
    ({"meshes": (1,)}, "meshes"),
    ({"t_final": 0.0}, "t_final"),
    ({"x_max": -1.0}, "x_max"),
    ({"dt_policy": "fixed"}, "dt"),
    ({"dt_policy": "sometimes"}, "dt_policy"),
    ({"boundary": "neumann"}, "boundary"),
    ({"initial": "noise"}, "initial"),
    ({"k_points": 2}, "k_points"),
    ({"kappa_list": ("DG", "zz")}, "kappa_list"),
])
def test_validation_errors(changes, key):
    with pytest.raises(ConfigError, match=key):
        RunConfig().updated(**changes).validate()


def test_error_points_at_source_line(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[scheme]\nflux = ip\np = 0\n")
    with pytest.raises(ConfigError, match=r"run.ini:3: p"):
        load_config(str(path)).validate()
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.ini"))
    cfg = load_config(str(path)).updated(p=0)
    with pytest.raises(ConfigError, match="command line: p"):
        cfg.validate()


def test_csv_round_trip():
    text = render_csv(("a", "b", "ok"), [(1, 0.1 + 0.2, True), ("x,y", None, False)], {"table": "5", "p": 2})
    assert text.startswith("# table: 5\n# p: 2\na,b,ok\n")
    meta, rows = read_csv(text)
    assert meta == {"table": "5", "p": "2"}
    assert rows[0] == {"a": "1", "b": "0.3", "ok": "true"}
    assert rows[1]["a"] == "x,y" and rows[1]["b"] == ""
    assert fmt(1 / 3) == "0.333333333"


def test_shipped_configs_are_valid():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(root.glob("*.ini"))
    assert len(paths) >= 6
    for path in paths:
        load_config(str(path)).validate()
