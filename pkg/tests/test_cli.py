"""Config schema, presets, bundles, and the command-line surface."""

import csv
import json

import pytest

from landau_dsmc.cli import (PRESETS, build_initial, build_sim_config,
                             kernel_check_report, load_config, main)
from landau_dsmc.schedulers import ConfigError


def tiny_cfg(**over):
    cfg = {
        "schema": 1,
        "N": 600,
        "dt": 0.1,
        "t_end": 0.5,
        "epsilon": 0.1,
        "seed": 7,
        "scheme": "nb",
        "kernel": {"surrogate": "tanh", "interaction": "maxwell"},
        "mode": {"kind": "deterministic"},
        "initial": {"kind": "bkw", "T": 1.0},
        "observe_every": 1,
    }
    cfg.update(over)
    return cfg


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# -- schema --------------------------------------------------------------------

def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown configuration keys"):
        load_config(tiny_cfg(banana=1))
    with pytest.raises(ConfigError, match="unknown kernel keys"):
        load_config(tiny_cfg(kernel={"surrogate": "tanh",
                                     "interaction": "maxwell", "mass": 2}))
    with pytest.raises(ConfigError, match="unknown mode keys"):
        load_config(tiny_cfg(mode={"kind": "deterministic", "order": 3}))


def test_missing_required_key_rejected():
    cfg = tiny_cfg()
    del cfg["kernel"]
    with pytest.raises(ConfigError, match="missing required key"):
        load_config(cfg)


def test_schema_version_rejected():
    with pytest.raises(ConfigError, match="schema"):
        load_config(tiny_cfg(schema=999))


def test_preset_merge_and_override():
    cfg = load_config({"preset": "test1-bkw", "N": 500, "t_end": 0.2,
                       "kernel": {"surrogate": "linear"}})
    assert cfg["N"] == 500
    assert cfg["kernel"]["surrogate"] == "linear"
    assert cfg["kernel"]["interaction"] == "maxwell"  # preserved from preset
    assert cfg["initial"]["kind"] == "bkw"


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_config({"preset": "test99"})


def test_all_presets_validate():
    for name in PRESETS:
        cfg = load_config({"preset": name})
        sim = build_sim_config(cfg)
        build_initial(cfg["initial"])
        assert sim.n_particles > 0


# -- exit codes ------------------------------------------------------------------

def test_main_config_error_exit_2(tmp_path):
    path = write_cfg(tmp_path, tiny_cfg(banana=1))
    assert main(["run", path]) == 2


def test_main_invalid_json_exit_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2


def test_main_missing_file_exit_2():
    assert main(["run", "/nonexistent/cfg.json"]) == 2


def test_main_nb_constraint_exit_2(tmp_path):
    path = write_cfg(tmp_path, tiny_cfg(dt=0.5))
    assert main(["run", path]) == 2


# -- run bundles -----------------------------------------------------------------

def test_run_writes_bundle(tmp_path, capsys):
    path = write_cfg(tmp_path, tiny_cfg())
    out = tmp_path / "bundle"
    assert main(["run", path, "--out", str(out)]) == 0
    assert (out / "config.json").exists()
    assert (out / "metadata.json").exists()
    obs = out / "observables.csv"
    assert obs.exists()
    with open(obs, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == "time"
    assert len(rows) == 1 + 5 + 1  # header + per-step + t=0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["collisions"] == 5 * 300
    # RFC-4180 line endings
    assert b"\r\n" in obs.read_bytes()


def test_bundle_reruns_bit_exactly(tmp_path):
    path = write_cfg(tmp_path, tiny_cfg())
    out1, out2 = tmp_path / "b1", tmp_path / "b2"
    assert main(["run", path, "--out", str(out1)]) == 0
    # re-run from the bundle's own config echo
    assert main(["run", str(out1 / "config.json"), "--out", str(out2)]) == 0
    assert (out1 / "observables.csv").read_bytes() == \
        (out2 / "observables.csv").read_bytes()


def test_run_records_and_replays_log(tmp_path):
    path = write_cfg(tmp_path, tiny_cfg())
    log_path = tmp_path / "tree.log"
    out1 = tmp_path / "rec"
    assert main(["run", path, "--out", str(out1), "--record-log",
                 str(log_path)]) == 0
    assert log_path.exists()
    out2 = tmp_path / "rep"
    assert main(["run", path, "--out", str(out2), "--replay-log",
                 str(log_path)]) == 0
    assert (out1 / "observables.csv").read_bytes() == \
        (out2 / "observables.csv").read_bytes()


def test_run_sg_bundle_has_node_files(tmp_path):
    cfg = tiny_cfg(mode={"kind": "sg", "order": 2, "n_quad": 8},
                   initial={"kind": "bkw", "T": [0.95, 0.1]})
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "sgout"
    assert main(["run", path, "--out", str(out)]) == 0
    assert (out / "node_00.csv").exists()
    assert (out / "node_07.csv").exists()
    assert (out / "expectation.csv").exists()
    assert (out / "variance.csv").exists()
    assert (out / "coeff_sums.csv").exists()


def test_run_mcz_mode(tmp_path):
    cfg = tiny_cfg(mode={"kind": "mcz", "samples": 3})
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "mcz"
    assert main(["run", path, "--out", str(out)]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["cost"] == 3 * 600


def test_seed_override(tmp_path):
    path = write_cfg(tmp_path, tiny_cfg())
    o1, o2 = tmp_path / "s1", tmp_path / "s2"
    main(["run", path, "--out", str(o1), "--seed", "100"])
    main(["run", path, "--out", str(o2), "--seed", "101"])
    assert (o1 / "observables.csv").read_bytes() != \
        (o2 / "observables.csv").read_bytes()
    assert json.loads((o1 / "config.json").read_text())["seed"] == 100


# -- sweep / compare / kernel-check ----------------------------------------------

def test_sweep_m_reference_order_error_zero(tmp_path, capsys):
    cfg = tiny_cfg(N=400, t_end=0.3,
                   mode={"kind": "sg", "order": 2, "n_quad": 16},
                   initial={"kind": "bkw", "T": [0.95, 0.1]})
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "sweep"
    assert main(["sweep-m", path, "--m", "1,2,6", "--ref", "6",
                 "--out", str(out)]) == 0
    rows = (out / "sweep_m.csv").read_text().strip().splitlines()
    assert rows[0] == "order,l2p_error"
    errs = {int(r.split(",")[0]): float(r.split(",")[1]) for r in rows[1:]}
    assert errs[6] == 0.0           # replay at the reference order
    assert errs[1] >= errs[2] >= 0  # coarser truncation, larger error


def test_compare_mc_table(tmp_path):
    cfg = tiny_cfg(N=400, t_end=0.3,
                   mode={"kind": "sg", "order": 2, "n_quad": 16},
                   initial={"kind": "bkw", "T": [0.95, 0.1]})
    path = write_cfg(tmp_path, cfg)
    out = tmp_path / "cmp"
    assert main(["compare-mc", path, "--m", "1,2", "--samples", "2,4",
                 "--replicates", "2", "--ref-nodes", "4",
                 "--ref-particles", "800", "--out", str(out)]) == 0
    rows = (out / "compare_mc.csv").read_text().strip().splitlines()
    assert rows[0] == "method,parameter,cost,error"
    methods = [r.split(",")[0] for r in rows[1:]]
    assert methods == ["sg", "sg", "mc", "mc"]
    costs = [int(r.split(",")[2]) for r in rows[1:]]
    assert costs == [400 * 4, 400 * 9, 400 * 2, 400 * 4]


def test_kernel_check_passes():
    lines, ok = kernel_check_report()
    assert ok, "\n".join(lines)
    assert main(["kernel-check"]) == 0
