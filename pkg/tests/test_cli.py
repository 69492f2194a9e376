import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from mipt import cli
from mipt import decoder as D
from mipt import experiments as E
from mipt.circuits.geometry import load_geometry
from mipt.circuits.ir import Circuit
from mipt.circuits.shallow import build_shallow_2d


def invoke(*args):
    return CliRunner().invoke(cli.main, [str(a) for a in args])


def read_csv(path):
    import csv

    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- literal parsing -----------------------------------------------------------------


def test_pi_literals_are_exact_rationals():
    assert cli.parse_real("0.4pi") == math.pi * 2 / 5
    assert cli.parse_real("2/5pi") == math.pi * 2 / 5
    assert cli.parse_real("0.1pi") == math.pi / 10
    assert cli.parse_real("pi") == math.pi
    assert cli.parse_real("-pi") == -math.pi
    assert cli.parse_real("0.25") == 0.25
    for bad in ("0.4p", "xpi", "1/0pi", ""):
        with pytest.raises(cli.ConfigError):
            cli.parse_real(bad)


def test_ranges_and_lists():
    assert cli.parse_reals("0.3..1.0") == [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert cli.parse_reals("0..1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_reals("0.1pi,0.4pi") == [math.pi / 10, math.pi * 2 / 5]
    assert cli.parse_ints("1..4:1") == [1, 2, 3, 4]
    assert cli.parse_ints("12,24") == [12, 24]
    with pytest.raises(cli.ConfigError):
        cli.parse_ints("1.5")
    with pytest.raises(cli.ConfigError):
        cli.parse_reals("1.0..0.3")


def test_blob_hash_matches_git():
    # git hash-object of "hello\n"
    assert cli.blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


# -- configuration errors -------------------------------------------------------------


def test_seed_is_required(tmp_path):
    res = invoke("run", "spectral", "--L", 6, "-o", tmp_path)
    assert res.exit_code == 2
    assert "seed" in res.output


@pytest.mark.parametrize(
    "args",
    [
        ("run", "spectral", "--seed", 1, "--L", 7),
        ("run", "fig4-decode", "--seed", 1, "--rho", "1.5"),
        ("run", "fig3-shallow", "--seed", 1, "--T", "9"),
        ("run", "fig4-decode", "--seed", 1, "--backend", "mps"),
        ("run", "spectral", "--seed", 1, "--theta", "0.4q"),
    ],
)
def test_invalid_configs_exit_2(tmp_path, args):
    res = invoke(*args, "-o", tmp_path / "out")
    assert res.exit_code == 2, res.output


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "L": 6, "bogus": 3}))
    res = invoke("run", "spectral", "--config", cfg, "-o", tmp_path / "out")
    assert res.exit_code == 2
    assert "bogus" in res.output


def test_config_for_other_experiment_exits_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "noisy-haar", "seed": 1}))
    res = invoke("run", "spectral", "--config", cfg, "-o", tmp_path / "out")
    assert res.exit_code == 2


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "L": 6, "theta": "0.1pi", "instances": 3, "output": str(tmp_path / "a")}))
    res = invoke("run", "spectral", "--config", cfg, "--L", 8, "-o", tmp_path / "b")
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "b" / "spectral.csv")
    assert [r["L"] for r in rows] == ["8"]
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["config"]["L"] == 8 and manifest["config"]["instances"] == 3


def test_simulation_error_exits_1(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("diverged")

    monkeypatch.setattr(E, "level_statistics", boom)
    res = invoke("run", "spectral", "--seed", 1, "--L", 6, "-o", tmp_path)
    assert res.exit_code == 1
    assert "diverged" in res.output


# -- determinism and manifests ---------------------------------------------------------


def _data_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "manifest.json"}


@pytest.mark.parametrize(
    "args",
    [
        ("spectral", "--L", 6, "--instances", 4),
        ("fig4-decode", "--N", 12, "--rho", "0.5..0.7", "--instances", 3, "--shots", 10, "--save-shots"),
        ("fig3-shallow", "--T", "2,3", "--instances", 2),
        ("fig2-dual", "--N", 4, "--T", 3, "--instances", 2),
        ("noisy-haar", "--N", 3, "--instances", 5),
        ("mps-decode", "--geometry", "n12", "--rho", 1.0, "--chi", "2,8", "--instances", 2, "--shots", 10),
    ],
)
def test_same_seed_gives_identical_files(tmp_path, args):
    a = invoke("run", *args, "--seed", 11, "-o", tmp_path / "a")
    b = invoke("run", *args, "--seed", 11, "-o", tmp_path / "b")
    assert a.exit_code == 0, a.output
    assert b.exit_code == 0, b.output
    da, db = _data_bytes(tmp_path / "a"), _data_bytes(tmp_path / "b")
    assert da and da == db
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["files"] == {name: cli.blob_hash(data) for name, data in da.items()}
    assert manifest["config"]["seed"] == 11 and manifest["wall_time_s"] >= 0


def test_workers_change_nothing_but_wall_time(tmp_path):
    args = ("run", "fig4-decode", "--N", 12, "--rho", "0.8", "--instances", 4, "--shots", 10, "--seed", 2)
    a = invoke(*args, "-o", tmp_path / "a")
    b = invoke(*args, "--workers", 2, "-o", tmp_path / "b")
    assert a.exit_code == 0 and b.exit_code == 0, b.output
    assert _data_bytes(tmp_path / "a") == _data_bytes(tmp_path / "b")


def test_manifest_config_reruns_identically(tmp_path):
    a = invoke("run", "noisy-haar", "--N", 3, "--instances", 4, "--seed", 9, "-o", tmp_path / "a")
    assert a.exit_code == 0
    config = json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]
    config["output"] = str(tmp_path / "b")
    path = tmp_path / "echo.json"
    path.write_text(json.dumps(config))
    b = invoke("run", "noisy-haar", "--config", path)
    assert b.exit_code == 0, b.output
    assert _data_bytes(tmp_path / "a") == _data_bytes(tmp_path / "b")


def test_fig4_output_columns(tmp_path):
    res = invoke("run", "fig4-decode", "--N", 12, "--rho", "0.3,1.0", "--instances", 2, "--shots", 5,
                 "--seed", 3, "-o", tmp_path)
    assert res.exit_code == 0, res.output
    rows = read_csv(tmp_path / "fig4_decode.csv")
    assert list(rows[0])[: len(D.RESULT_COLUMNS)] == list(D.RESULT_COLUMNS)
    r_max = D.DecodingSchedule.of(load_geometry("n12")).r_max
    assert len(rows) == 2 * (r_max + 1)
    assert {r["rho"] for r in rows} == {"0.3", "1.0"}


# -- external decoding ---------------------------------------------------------------


def _external_setup(tmp_path, name="n12", rho=1.0, n_circuits=3, shots=20, seed=4):
    res = invoke("run", "fig4-decode", "--geometry", name, "--rho", rho, "--instances", n_circuits,
                 "--shots", shots, "--seed", seed, "--save-shots", "-o", tmp_path / "run")
    assert res.exit_code == 0, res.output
    shots_file = next((tmp_path / "run").glob("shots_*.jsonl"))
    circuit_file = next((tmp_path / "run").glob("circuits_*.jsonl"))
    return shots_file, circuit_file


def test_saved_circuits_rebuild_from_circuit_seeds(tmp_path):
    _, circuit_file = _external_setup(tmp_path, n_circuits=2, shots=2)
    geom = load_geometry("n12")
    saved = cli.read_circuits(circuit_file)
    assert sorted(saved) == [0, 1]
    for i, circ in saved.items():
        ref = build_shallow_2d(geom, 5, 1.0, E.circuit_seed(4, geom, i))
        assert [op.support for op in circ.two_qubit_ops()] == [op.support for op in ref.two_qubit_ops()]


def test_decode_external_matches_in_process(tmp_path):
    shots_file, circuit_file = _external_setup(tmp_path)
    out = tmp_path / "ext.csv"
    res = invoke("decode-external", shots_file, circuit_file, "--geometry", "n12", "--seed", 0, "-o", out)
    assert res.exit_code == 0, res.output
    ext = read_csv(out)
    ref = [r for r in read_csv(tmp_path / "run" / "fig4_decode.csv")]
    assert [float(r["zeta"]) for r in ext] == [float(r["zeta"]) for r in ref]
    # circuit files keep 12 significant digits of each angle
    np.testing.assert_allclose([float(r["zeta_sim"]) for r in ext], [float(r["zeta_sim"]) for r in ref], atol=1e-9)
    assert (tmp_path / "ext.manifest.json").exists()


def test_shot_file_seed_is_circuit_seed(tmp_path):
    shots_file, _ = _external_setup(tmp_path, n_circuits=2, shots=3)
    ids, _, seeds = D.read_shots(shots_file)
    geom = load_geometry("n12")
    assert [seeds[k] for k in range(len(ids))] == [E.circuit_seed(4, geom, int(i)) for i in ids]


def test_decode_external_truncated_file_reports_line(tmp_path):
    shots_file, circuit_file = _external_setup(tmp_path, n_circuits=1, shots=5)
    lines = shots_file.read_text().splitlines()
    lines[3] = lines[3][: len(lines[3]) // 2]
    shots_file.write_text("\n".join(lines) + "\n")
    res = invoke("decode-external", shots_file, circuit_file, "--geometry", "n12", "--seed", 0,
                 "-o", tmp_path / "x.csv")
    assert res.exit_code == 2
    assert ":4:" in res.output


def test_decode_external_length_mismatch(tmp_path):
    shots_file, circuit_file = _external_setup(tmp_path, n_circuits=1, shots=5)
    res = invoke("decode-external", shots_file, circuit_file, "--geometry", "n24", "--seed", 0,
                 "-o", tmp_path / "x.csv")
    assert res.exit_code == 2


def test_decode_external_counts_impossible_records(tmp_path):
    circ = Circuit(12, [], {})  # every qubit reads 0
    good = np.zeros((4, 12), dtype=np.int8)
    bad = good.copy()
    bad[:, load_geometry("n12").patches[1][0]] = 1  # a decoded (non-probe) qubit
    shots_file = tmp_path / "s.jsonl"
    D.write_shots(shots_file, np.zeros(8, dtype=int), np.concatenate([good, bad]))
    circuit_file = tmp_path / "c.jsonl"
    cli.write_circuits(circuit_file, {0: circ})
    res = invoke("decode-external", shots_file, circuit_file, "--geometry", "n12", "--seed", 0,
                 "-o", tmp_path / "x.csv")
    assert res.exit_code == 0, res.output
    assert "rejected 4" in res.stderr
    rows = read_csv(tmp_path / "x.csv")
    assert int(rows[0]["n_rejected"]) == 4 and int(rows[0]["n_shots"]) == 4


def test_decode_external_mps_huge_chi_matches_exact(tmp_path):
    shots_file, circuit_file = _external_setup(tmp_path, name="grid19", rho=1.0, n_circuits=2, shots=20)
    exact = tmp_path / "exact.csv"
    mps = tmp_path / "mps.csv"
    r1 = invoke("decode-external", shots_file, circuit_file, "--geometry", "grid19", "--seed", 0, "-o", exact)
    r2 = invoke("decode-external", shots_file, circuit_file, "--geometry", "grid19", "--seed", 0,
                "--backend", "mps", "--chi", 1024, "-o", mps)
    assert r1.exit_code == 0 and r2.exit_code == 0, r2.output
    a, b = read_csv(exact), read_csv(mps)
    assert [r["zeta"] for r in a] == [r["zeta"] for r in b]
    np.testing.assert_allclose([float(r["zeta_sim"]) for r in a], [float(r["zeta_sim"]) for r in b], atol=1e-9)


def test_decode_external_mps_needs_chi(tmp_path):
    shots_file, circuit_file = _external_setup(tmp_path, n_circuits=1, shots=2)
    res = invoke("decode-external", shots_file, circuit_file, "--geometry", "n12", "--seed", 0,
                 "--backend", "mps", "-o", tmp_path / "x.csv")
    assert res.exit_code == 2
