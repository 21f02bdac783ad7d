import json
import subprocess
import sys

import pytest

from psbases.cli import ExperimentConfig, build_parser, config_from_args, main


def run(args, capsys):
    rc = main(args)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_params_dump(capsys):
    rc, out, err = run(["params", "dump", "--k", "2", "--c", "1.25"], capsys)
    assert rc == 0
    d = json.loads(out)
    assert d["P"] == pytest.approx(0.0125) and d["K"] == 24 and d["P0star"] is None
    header = json.loads(err.strip().splitlines()[-1])
    assert {"version", "hash", "wall_time"} <= set(header)


def test_gen(capsys):
    rc, out, _ = run(["gen", "--c", "1.5", "--k", "1", "--xmax", "12"], capsys)
    assert rc == 0 and out.split() == ["1", "2", "5", "8", "11"]


def test_count(capsys):
    rc, out, _ = run(["count", "--c", "1.5", "--x", "10000"], capsys)
    assert out.strip() == "464"


def test_domain_error_exit(capsys):
    rc, _, err = run(["gen", "--c", "2.0", "--xmax", "12"], capsys)
    assert rc == 2 and "non-integral" in err


def test_resource_error_exit(capsys):
    rc, _, err = run(["gen", "--c", "1.5", "--primes", "--xmax", "1000000000"], capsys)
    assert rc == 3


def test_consistency_error_exit(monkeypatch, capsys):
    from psbases import singular
    from psbases.errors import ConsistencyError

    def boom(*a, **k):
        raise ConsistencyError("imaginary residue")

    monkeypatch.setattr(singular, "singular_series_many", boom)
    rc, _, _ = run(["singular", "--k", "2", "--h", "5", "--n", "29"], capsys)
    assert rc == 4


def test_usage_exit():
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code == 64
    with pytest.raises(SystemExit) as e:
        main(["gen"])
    assert e.value.code == 64


def test_module_entry():
    p = subprocess.run([sys.executable, "-m", "psbases", "count", "--c", "1.5", "--x", "12"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.strip() == "5"


def test_csv_header_and_rows(capsys):
    rc, out, _ = run(["repcount", "--c", "1.5", "--h", "2", "--N", "10"], capsys)
    lines = out.splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["config"]["command"] == "repcount"
    assert lines[1] == "n,r"
    assert lines[2 + 10] == "10,3"


def test_singular_csv(capsys):
    rc, out, _ = run(["singular", "--k", "1", "--h", "2", "--Q", "2", "--prime", "--n", "3:4"], capsys)
    rows = out.splitlines()[2:]
    assert rows[0].startswith("3,0") and rows[1].startswith("4,2.0")


def test_hua_csv(capsys):
    rc, out, _ = run(["hua", "--c", "1.5", "--h", "2", "--xgrid", "10,100"], capsys)
    assert out.splitlines()[2].startswith("10,27,")


@pytest.mark.parametrize("mode,extra", [
    ("verify-quadrature", ["--h", "2", "--N", "50,100", "--omega", "0.4"]),
    ("major", ["--N", "1000"]),
    ("minor", ["--N", "1000"]),
    ("transfer", ["--k", "2", "--c", "1.2", "--x", "1000"]),
])
def test_circle_modes(mode, extra, capsys):
    rc, out, _ = run(["circle", mode] + extra, capsys)
    assert rc == 0
    assert out.splitlines()[1].split(",")[1:] == ["measured", "referenceScale", "ratio"]
    if mode == "verify-quadrature":
        for row in out.splitlines()[2:]:
            assert float(row.split(",")[3]) == pytest.approx(1.0, rel=1e-8)


def test_byte_identical_reruns(tmp_path):
    outs = []
    for _ in range(2):
        assert main(["--out", str(tmp_path / "same.csv"), "circle", "major", "--N", "1000"]) == 0
        outs.append((tmp_path / "same.csv").read_bytes())
    assert outs[0] == outs[1]


def test_subbase_roundtrip(tmp_path):
    f = tmp_path / "s.json"
    args = ["subbase", "sample", "--xmax", "100000", "--lambda", "0.5", "--seed", "3", "--out", str(f)]
    assert main(args) == 0
    first = f.read_bytes()
    d = json.loads(first)
    run0 = d["runs"][0]
    from psbases.subbase import SamplePlan, sample_subbase

    replay = sample_subbase(SamplePlan.from_dict(run0["plan"]))
    assert replay.A.tolist() == run0["result"]["A"]
    # a different thread count changes only the recorded parallelism, never A
    assert main(["--threads", "4"] + args) == 0
    assert json.loads(f.read_text())["runs"][0]["result"]["A"] == run0["result"]["A"]
    assert main(args) == 0 and f.read_bytes() == first


def test_subbase_verify_seeds(tmp_path):
    f = tmp_path / "v.json"
    assert main(["--threads", "2", "subbase", "verify", "--xmax", "200000", "--seeds", "1..3", "--out", str(f)]) == 0
    d = json.loads(f.read_text())
    assert len(d["runs"]) == 3
    assert [r["plan"]["seed"] for r in d["runs"]] == [1, 2, 3]
    assert abs(d["calibration"]["median_ratio"] - 1) <= 0.05


def test_config_roundtrip():
    ns = build_parser().parse_args(["subbase", "verify", "--c", "1.50", "--seeds", "1..4", "--h", "5"])
    cfg = config_from_args(ns)
    text = cfg.to_json()
    again = ExperimentConfig.from_json(text)
    assert again.to_json() == text and again.hash == cfg.hash
    assert cfg.options["c"] == "1.50"  # decimal text kept verbatim
    assert cfg.seeds == [1, 2, 3, 4]


def test_accept_quick_subset(capsys):
    rc = main(["accept", "--profile", "quick", "--only", "2,7"])
    out = capsys.readouterr().out
    assert rc == 0
    assert sum(line.startswith("[PASS]") for line in out.splitlines()) == 3
