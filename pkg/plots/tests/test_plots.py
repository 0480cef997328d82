import shutil
from pathlib import Path

import pytest

from regret_plots import PlotSpec, SchemaError, plot
from regret_plots.cli import main, spec_from_toml

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "golden_results.csv"
GOLDEN_SWEEP = DATA / "golden_sweep.csv"


def test_regret_vs_time_renders_and_is_byte_stable(tmp_path):
    # Acceptance: render mean +/- std bands from the golden fixture; the
    # image must exist, be nonempty, and re-render byte-identically.
    spec_a = PlotSpec(
        csv_paths=(str(GOLDEN),), kind="regret_vs_time", out_path=str(tmp_path / "a.png")
    )
    spec_b = PlotSpec(
        csv_paths=(str(GOLDEN),), kind="regret_vs_time", out_path=str(tmp_path / "b.png")
    )
    path_a = plot(spec_a)
    path_b = plot(spec_b)
    assert path_a.exists() and path_a.stat().st_size > 0
    assert path_a.read_bytes() == path_b.read_bytes()
    print(f"\nACCEPTANCE PASS: plots golden render :: {path_a.stat().st_size} bytes, byte-stable")


def test_input_csv_never_modified(tmp_path):
    copy = tmp_path / "input.csv"
    shutil.copy(GOLDEN, copy)
    before = copy.read_bytes()
    plot(PlotSpec(csv_paths=(str(copy),), kind="regret_vs_time", out_path=str(tmp_path / "x.png")))
    assert copy.read_bytes() == before


def test_single_run_zero_width_band(tmp_path):
    single = tmp_path / "single.csv"
    lines = GOLDEN.read_text().splitlines()
    rows = [l for l in lines[1:] if l.split(",")[1] == "learner" and l.split(",")[2] == "0"]
    single.write_text("\n".join([lines[0]] + rows) + "\n")
    out = plot(PlotSpec(csv_paths=(str(single),), kind="regret_vs_time", out_path=str(tmp_path / "s.png")))
    assert out.stat().st_size > 0


def test_labels_must_cover_all_algorithms(tmp_path):
    spec = PlotSpec(
        csv_paths=(str(GOLDEN),),
        kind="regret_vs_time",
        out_path=str(tmp_path / "x.png"),
        labels={"learner": "Learner"},
    )
    with pytest.raises(ValueError, match="baseline.*neither labeled nor excluded"):
        plot(spec)


def test_excluded_algorithm_is_dropped(tmp_path):
    spec = PlotSpec(
        csv_paths=(str(GOLDEN),),
        kind="regret_vs_time",
        out_path=str(tmp_path / "x.png"),
        labels={"learner": "Learner"},
        exclude=("baseline",),
    )
    assert plot(spec).stat().st_size > 0


def test_schema_mismatch_names_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("experiment_id,algorithm,run,round,regret\nx,a,0,1,0.5\n")
    spec = PlotSpec(csv_paths=(str(bad),), kind="regret_vs_time", out_path=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="cumulative_regret"):
        plot(spec)


def test_missing_rounds_rejected(tmp_path):
    truncated = tmp_path / "gap.csv"
    lines = GOLDEN.read_text().splitlines()
    kept = [l for l in lines if not (l.split(",")[1:4] == ["learner", "0", "7"])]
    truncated.write_text("\n".join(kept) + "\n")
    spec = PlotSpec(csv_paths=(str(truncated),), kind="regret_vs_time", out_path=str(tmp_path / "x.png"))
    with pytest.raises(SchemaError, match="missing round"):
        plot(spec)


def test_final_vs_availability(tmp_path):
    out = plot(
        PlotSpec(
            csv_paths=(str(GOLDEN_SWEEP),),
            kind="final_vs_availability",
            out_path=str(tmp_path / "sweep.png"),
        )
    )
    assert out.stat().st_size > 0


def test_final_vs_k_rejects_wrong_axis(tmp_path):
    spec = PlotSpec(
        csv_paths=(str(GOLDEN_SWEEP),), kind="final_vs_K", out_path=str(tmp_path / "x.png")
    )
    with pytest.raises(SchemaError, match="axis"):
        plot(spec)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError, match="kind"):
        PlotSpec(csv_paths=("x.csv",), kind="pie", out_path="x.png")


class TestCli:
    def test_flags(self, tmp_path, capsys):
        out = tmp_path / "cli.png"
        code = main(
            [
                "--csv", str(GOLDEN),
                "--kind", "regret_vs_time",
                "--out", str(out),
                "--label", "learner=Sleeping learner",
                "--label", "baseline=Uniform",
            ]
        )
        assert code == 0
        assert out.stat().st_size > 0
        assert str(out) in capsys.readouterr().out

    def test_spec_file(self, tmp_path, capsys):
        out = tmp_path / "spec.png"
        spec_path = tmp_path / "plot.toml"
        spec_path.write_text(
            f"""
[plot]
kind = "regret_vs_time"
csv = ["{GOLDEN}"]
out = "{out}"
exclude = ["baseline"]
"""
        )
        assert main(["--spec", str(spec_path)]) == 0
        assert out.exists()

    def test_spec_roundtrip_fields(self, tmp_path):
        spec_path = tmp_path / "plot.toml"
        spec_path.write_text(
            f"""
[plot]
kind = "final_vs_availability"
csv = "{GOLDEN_SWEEP}"
out = "x.png"
dpi = 72
title = "Final regret"
[plot.labels]
learner = "L"
baseline = "B"
"""
        )
        spec = spec_from_toml(str(spec_path))
        assert spec.kind == "final_vs_availability"
        assert spec.dpi == 72
        assert spec.labels == {"learner": "L", "baseline": "B"}

    def test_error_is_one_line(self, tmp_path, capsys):
        code = main(
            ["--csv", str(tmp_path / "absent.csv"), "--kind", "regret_vs_time", "--out", "x.png"]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
