import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfilter.cli import ConfigError, RUN_SCHEMA, build_parser, load_config, main
from hybridfilter.dg import GridData, build_mesh, gauss_legendre
from hybridfilter.experiments import get_preset, summarize
from hybridfilter.metrics import grid_errors, quartiles, window_indices


def _grid(vals, N=4):
    m = build_mesh(0, 1, N)
    q = gauss_legendre(4)
    return GridData(m, q, np.asarray(vals, dtype=float))


def test_grid_errors_examples():
    a = _grid(np.zeros(16))
    b = _grid(np.r_[np.full(8, 0.5), np.zeros(8)])
    l2, linf = grid_errors(a, b)
    assert linf == 0.5 and l2 == pytest.approx(np.sqrt(0.125))
    l2w, linfw = grid_errors(a, b, (2, 3))
    assert l2w == 0 and linfw == 0
    assert list(window_indices(a, (3, 4))) == [12, 13, 14, 15, 0, 1, 2, 3]
    with pytest.raises(ValueError):
        grid_errors(a, _grid(np.zeros(32), 8))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=16, max_size=16),
       st.lists(st.floats(-1e6, 1e6), min_size=16, max_size=16))
def test_grid_errors_symmetric(u, v):
    a, b = _grid(u), _grid(v)
    assert grid_errors(a, b) == grid_errors(b, a)


def test_quartiles():
    assert quartiles([1, 2, 3, 4, 5]) == (2.0, 3.0, 4.0)
    assert quartiles([7.0]) == (7.0, 7.0, 7.0)
    with pytest.raises(ValueError):
        quartiles([])


def test_summarize_groups():
    rows = [{"method": m, "l2": v, "linf": 2 * v} for m, v in
            (("a", 1.0), ("a", 3.0), ("b", 2.0))]
    out = summarize(rows, ("method",))
    med = {(r["method"], r["metric"]): r["median"] for r in out}
    assert med[("a", "l2")] == 2.0 and med[("a", "linf")] == 4.0 and med[("b", "l2")] == 2.0


def test_preset_overrides():
    p = get_preset("desk", train_samples=9, train_max_epochs=3)
    assert p.train_samples == 9 and p.train.max_epochs == 3
    assert p.arch.n_hidden_layers == 3 and p.arch.hidden_channels == 32
    assert get_preset("paper").train_samples == 900
    with pytest.raises(ValueError):
        get_preset("huge")


def test_config_errors_name_lines(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{\n  "ic_id": "sod",\n  "p": "two"\n}\n')
    with pytest.raises(ConfigError, match=r"run.json:3:"):
        load_config(cfg, RUN_SCHEMA)
    cfg.write_text('{\n  "ic_id": "sod",\n  "colour": 1\n}\n')
    with pytest.raises(ConfigError, match=r":3: unknown key"):
        load_config(cfg, RUN_SCHEMA)
    cfg.write_text('{\n  "ic_id": "sod",\n  "p": 2,,\n}\n')
    with pytest.raises(ConfigError, match=r":3:"):
        load_config(cfg, RUN_SCHEMA)
    cfg.write_text('{"ic_id": "sod", "p": true}')
    with pytest.raises(ConfigError):
        load_config(cfg, RUN_SCHEMA)
    cfg.write_text('{"ic_id": "sod", "p": 1, "T_f": 2}')
    assert load_config(cfg, RUN_SCHEMA)["T_f"] == 2


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n "ic_id": "sod",\n "p": 1.5\n}')
    assert main(["euler-run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bad.json:3" in capsys.readouterr().err


def test_cli_parser_has_all_commands():
    ap = build_parser()
    for cmd in ("generate-data", "train", "euler-run", "filter", "evaluate"):
        args = ap.parse_args([cmd] + (["x.dgf"] if cmd == "filter" else []))
        assert callable(args.func)


def test_cli_euler_run_and_filter(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"ic_id": "sod", "p": 1, "N": 64, "T_f": 0.5}))
    assert main(["euler-run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    dump = tmp_path / "sod_p1.dgf"
    assert dump.exists() and (tmp_path / "sod_p1.csv").exists()
    desc = json.loads((tmp_path / "sod_p1.json").read_text())
    assert desc["tvb_M"] == 50.0 and desc["T_f"] == 0.5
    capsys.readouterr()
    assert main(["filter", str(dump), "--out", str(tmp_path)]) == 0
    windows = json.loads(capsys.readouterr().out)
    assert len(windows) >= 1
    lines = (tmp_path / "sod_p1_rho_filtered.csv").read_text().splitlines()
    assert lines[0] == "x,value,label" and len(lines) == 64 * 4 + 1
    for var in ("u", "p", "S"):
        assert (tmp_path / f"sod_p1_{var}_filtered.csv").exists()


def test_cli_train_without_corpus(tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--out", str(tmp_path)])
