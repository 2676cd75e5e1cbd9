import json

import numpy as np
import pytest

from fwsolitary.cli import RunConfig, main, run, validate
from fwsolitary.spectral_core import Field, make_grid, read_field_csv, write_field_csv


def load(path):
    return json.loads(path.read_text())


def test_solve_wave_outputs(tmp_path):
    out = tmp_path / "w"
    assert main(["solve-wave", "--c", "1.2", "--out", str(out)]) == 0
    side = load(out / "wave.json")
    assert side["converged"] and side["sigma_theory"] == pytest.approx(np.sqrt(1 / 6))
    assert abs(side["sigma_fit"] - side["sigma_theory"]) < 0.01 * side["sigma_theory"]
    prof = read_field_csv(out / "profile.csv")
    assert prof.grid == make_grid(40.0, 512)
    man = load(out / "manifest.json")
    assert man["params"] == {"c": 1.2, "P": 40.0, "N": 512, "tol": 1e-10, "max_iters": 50000}
    assert man["exit_status"] == 0 and "numpy" in man["versions"] and man["wall_time_s"] >= 0


def test_subsonic_speed_is_a_domain_error(tmp_path):
    assert main(["solve-wave", "--c", "0.9", "--out", str(tmp_path)]) == 2


def test_nonconvergence_exit(tmp_path):
    assert main(["solve-wave", "--c", "1.2", "--max-iters", "2", "--out", str(tmp_path)]) == 3


def test_validate_collects_all_problems():
    assert validate(RunConfig("solve-wave", {"c": 1.2})) == []
    d = validate(RunConfig("solve-wave", {"c": 1.2, "N": 511}))
    assert len(d) == 1 and d[0].startswith("N:")
    d = validate(RunConfig("solve-variational", {"q": 0}))
    assert len(d) == 1 and "Q(u) = q > 0" in d[0]
    d = validate(RunConfig("solve-variational", {"q": -1, "N": 7, "bogus": 1}))
    assert len(d) == 3
    assert validate(RunConfig("frobnicate"))[0].startswith("command:")
    assert any(x.startswith("c:") for x in validate(RunConfig("kernel", {})))


def test_evolve_zero_data(tmp_path):
    init = write_field_csv(Field.zeros(make_grid(10.0, 64)), tmp_path / "zero.csv")
    out = tmp_path / "ev"
    assert main(["evolve", "--init", str(init), "--t-end", "1", "--record-every", "5",
                 "--out", str(out)]) == 0
    traj = load(out / "trajectory" / "trajectory.json")
    for name in traj["files"]:
        assert not np.any(read_field_csv(out / "trajectory" / name).values)


def test_evolve_blowup_exit(tmp_path):
    g = make_grid(10.0, 64)
    init = write_field_csv(Field(g, np.full(64, 2e6)), tmp_path / "big.csv")
    out = tmp_path / "ev"
    assert main(["evolve", "--init", str(init), "--t-end", "1", "--out", str(out)]) == 4
    assert "blowup_time" in load(out / "trajectory" / "trajectory.json")


def test_missing_init_is_io_error(tmp_path):
    assert main(["evolve", "--init", str(tmp_path / "nope.csv"), "--t-end", "1",
                 "--out", str(tmp_path / "o")]) == 5


def test_unwritable_out_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["kernel", "--c", "1.5", "--out", str(blocker / "sub")]) == 5


def test_malformed_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert main(["solve-wave", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"params": {"q": 1.0, "N": 256, "penalty": {"scale": 2.0}},
                               "seed": 3}))
    out = tmp_path / "v"
    assert main(["solve-variational", "--config", str(cfg), "--set", "P=30",
                 "--out", str(out)]) == 0
    man = load(out / "manifest.json")
    assert man["params"]["N"] == 256 and man["params"]["P"] == 30.0
    assert man["params"]["penalty.scale"] == 2.0 and man["seed"] == 3
    res = load(out / "result.json")
    assert res["converged"] and not res["penalty_active"]


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["stability", "--c", "1.2", "--seeds", "2", "--t-end", "2",
                     "--seed", "11", "--out", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "stability.json").read_bytes() == (outs[1] / "stability.json").read_bytes()
    assert (outs[0] / "seeds" / "seed_001.csv").read_bytes() == \
        (outs[1] / "seeds" / "seed_001.csv").read_bytes()


def test_kernel_and_decay(tmp_path):
    assert main(["kernel", "--c", "1.3333333333333333", "--out", str(tmp_path / "k")]) == 0
    k = load(tmp_path / "k" / "kernel.json")
    assert k["sigma"] == pytest.approx(0.5) and k["g0"] == pytest.approx(9 / 16)
    assert (tmp_path / "k" / "kernel.csv").read_text().startswith("y,g\n")
    main(["solve-wave", "--c", "1.2", "--out", str(tmp_path / "w")])
    assert main(["decay", "--profile", str(tmp_path / "w" / "profile.csv"), "--c", "1.2",
                 "--out", str(tmp_path / "d")]) == 0
    d = load(tmp_path / "d" / "decay.json")
    assert d["accepted"] and d["relative_error"] < 0.01


def test_classify_command(tmp_path):
    g = make_grid(40.0, 512)
    ddir = tmp_path / "dens"
    ddir.mkdir()
    for i, x in enumerate((0.0, 2.0, 4.0, 6.0, 8.0)):
        v = np.exp(-(g.nodes - x) ** 2)
        write_field_csv(Field(g, v / (g.spacing * v.sum())), ddir / f"d{i:02d}.csv")
    out = tmp_path / "c"
    assert main(["classify", "--densities", str(ddir), "--out", str(out)]) == 0
    assert load(out / "classification.json")["case_label"] == "Concentration"


def test_subadditivity_command(tmp_path):
    out = tmp_path / "s"
    assert main(["subadditivity", "--q-list", "1,2", "--restarts", "1", "--out", str(out)]) == 0
    rep = load(out / "subadditivity.json")
    assert rep["converged"] == [True, True]
    assert all(c["strict"] for c in rep["checks"])


def test_run_api_directly(tmp_path):
    assert run(RunConfig("kernel", {"c": 2.0, "n_points": 5}, tmp_path, 0)) == 0
    assert len((tmp_path / "kernel.csv").read_text().splitlines()) == 6
