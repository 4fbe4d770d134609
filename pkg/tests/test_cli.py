import json

from metabasins.cli import main


def run(args):
    return main(args)


def test_analyze_l6(tmp_path, capsys):
    out = tmp_path / "a"
    assert run(["analyze", "--canonical", "L6", "--out", str(out)]) == 0
    filt = json.loads((out / "filtration.json").read_text())
    assert filt["deletion_order"] == [2, 0, 4]
    assert filt["deletion_costs"] == [3, 8]
    valleys = json.loads((out / "valleys.json").read_text())
    assert valleys["2"]["valleys"] == {"0": [0, 1, 2], "4": [4, 5]}
    assert valleys["2"]["nonassigned"] == [3]
    assert (out / "tree.dot").read_text().startswith("digraph")
    saddles = (out / "saddles.csv").read_text().splitlines()
    assert saddles[0] == "a,b,saddle,energy"
    assert "0,4,3,6" in saddles


def test_analyze_byte_stable(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    run(["analyze", "--canonical", "L14X", "--out", str(out1)])
    run(["analyze", "--canonical", "L14X", "--out", str(out2)])
    for name in ("filtration.json", "valleys.json", "tree.dot", "saddles.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_analyze_l14_reconstruction(tmp_path):
    out = tmp_path / "l14"
    assert run(["analyze", "--canonical", "L14", "--out", str(out)]) == 0
    filt = json.loads((out / "filtration.json").read_text())
    assert filt["deletion_order"] == [8, 12, 6, 2, 10, 14, 4]
    assert filt["M"]["7"] == [4]
    valleys = json.loads((out / "valleys.json").read_text())
    assert valleys["1"]["nonassigned"] == [3, 5, 7, 9, 11, 13]
    assert valleys["6"]["nonassigned"] == [11]


def test_missing_file_exits_2(tmp_path, capsys):
    code = run(["analyze", "--landscape", str(tmp_path / "nope.json"),
                "--out", str(tmp_path / "x")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_mb_l6_none(tmp_path, capsys):
    out = tmp_path / "mb6"
    assert run(["mb", "--canonical", "L6", "--eps", "0.5", "--out", str(out)]) == 0
    assert "no metabasin level" in capsys.readouterr().out
    data = json.loads((out / "mb.json").read_text())
    assert data["level"] is None


def test_mb_l14x(tmp_path, capsys):
    out = tmp_path / "mbx"
    assert run(["mb", "--canonical", "L14X", "--eps", "2.5", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "level 5" in text
    data = json.loads((out / "mb.json").read_text())
    assert data["level"] == 5
    assert data["partition"]["4"] == [1, 2, 3, 4]


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert run(["simulate", "--canonical", "L6", "--beta", "1.0", "--steps", "200",
                "--seed", "3", "--start", "4", "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "n,state" and len(rows) == 202
    stats = json.loads((out / "stats.json").read_text())
    assert stats["start"] == 4
    assert sum(stats["occupancy"].values()) == 201


def test_aggregate_outputs(tmp_path):
    out = tmp_path / "agg"
    assert run(["aggregate", "--canonical", "L6", "--level", "2",
                "--out", str(out)]) == 0
    phat = json.loads((out / "phat.json").read_text())
    assert phat["rows"]["3"] == {"0": 0.5, "4": 0.5}
    assert phat["rows"]["0"] == {"3": 1.0}
    exps = json.loads((out / "exponents.json").read_text())
    assert exps["D"]["0->4"] == 0.0
    assert exps["limits"]["0->4"] == 0.5


def test_verify_subset_and_grid_echo(tmp_path, capsys):
    out = tmp_path / "ver"
    code = run(["verify", "--only", "golden-fixtures,exit-time-slope",
                "--beta-grid", "4:12:5", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "PASS  golden-fixtures" in text and "PASS  exit-time-slope" in text
    report = json.loads((out / "verify.json").read_text())
    assert len(report["config"]["beta_grid"]) == 5
    assert report["all_passed"] is True
    assert len(report["criteria"]) == 2
    # curve CSVs were exported for the slope criterion
    curves = list((out / "curves").glob("*.csv"))
    assert curves


def test_report_renders_svg(tmp_path):
    out = tmp_path / "rep"
    run(["verify", "--only", "exit-time-slope", "--out", str(out)])
    assert run(["report", "--out", str(out)]) == 0
    plots = list((out / "plots").glob("*.svg"))
    assert plots
    body = plots[0].read_text()
    assert body.startswith("<svg") and "polyline" in body


def test_report_without_curves(tmp_path, capsys):
    assert run(["report", "--out", str(tmp_path / "empty")]) == 2


def test_verify_report_byte_stable(tmp_path):
    out1, out2 = tmp_path / "v1", tmp_path / "v2"
    for out in (out1, out2):
        assert run(["verify", "--only", "golden,spectral", "--out", str(out)]) == 0
    assert (out1 / "verify.json").read_bytes() == (out2 / "verify.json").read_bytes()


def test_verify_serializes_counting_criteria(tmp_path):
    # bound-domination accumulates numpy comparisons; the report must still be
    # valid JSON with plain booleans
    out = tmp_path / "vb"
    assert run(["verify", "--only", "bound-domination", "--out", str(out)]) == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["criteria"][0]["passed"] is True
