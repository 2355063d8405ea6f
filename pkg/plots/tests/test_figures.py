"""avs-plot tests: rendering each kind, CSV validation diagnostics, input
immutability, and byte-stable output."""

import pytest

from avs_plot import FigureSpec, KINDS, ValidationError, load_rows, render_all, render_figure
from avs_plot.cli import main as cli_main

HEADER = "policy,obs_model,stage,n_sim,particles,episodes,found,mean_steps,std_steps,mean_time_s,failures"

MATRIX_CSV = "\n".join(
    [
        HEADER,
        "pomcp,grid,2d,4,200,100,88,68.240000,49.400000,1.020000,12",
        "pomcp,grid,2d,50,200,100,99,58.570000,46.400000,2.690000,1",
        "pomcp,grid,2d,200,200,100,100,56.840000,39.700000,8.150000,0",
        "pomcp,binary,2d,200,200,100,74,80.120000,55.000000,9.900000,26",
        "random,grid,2d,0,200,100,27,77.440000,69.100000,0.830000,73",
        "",
    ]
)


@pytest.fixture
def matrix_csv(tmp_path):
    path = tmp_path / "matrix.csv"
    path.write_text(MATRIX_CSV)
    return path


def _is_png(path):
    return path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("kind", KINDS)
def test_render_each_kind(matrix_csv, tmp_path, kind):
    out = tmp_path / f"{kind}.png"
    render_figure(FigureSpec(matrix_csv, kind, out))
    assert out.exists() and _is_png(out)


def test_single_row_csv_renders(matrix_csv, tmp_path):
    path = tmp_path / "single.csv"
    path.write_text(HEADER + "\npomcp,grid,2d,4,200,1,1,12.000000,0.000000,0.500000,0\n")
    out = tmp_path / "single.png"
    render_figure(FigureSpec(path, "success", out))
    assert _is_png(out)


def test_render_all_emits_every_kind(matrix_csv, tmp_path):
    written = render_all(matrix_csv, tmp_path / "figs")
    assert sorted(p.name for p in written) == sorted(f"{k}.png" for k in KINDS)
    assert all(_is_png(p) for p in written)


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "missing.csv"
    header_without_steps = HEADER.replace("mean_steps,", "")
    path.write_text(header_without_steps + "\npomcp,grid,2d,4,200,1,1,0.0,0.5,0\n")
    with pytest.raises(ValidationError, match=r"row 1.*mean_steps"):
        load_rows(path, "steps")
    # the same file is fine for kinds that do not need the column
    assert load_rows(path, "time")


def test_malformed_value_gets_row_diagnostic(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        HEADER
        + "\npomcp,grid,2d,4,200,100,88,68.0,49.0,1.0,12"
        + "\npomcp,grid,2d,oops,200,100,99,58.0,46.0,2.7,1\n"
    )
    with pytest.raises(ValidationError, match=r"row 3.*'oops'.*n_sim"):
        load_rows(path, "success")


def test_nan_steps_tolerated(tmp_path):
    path = tmp_path / "nan.csv"
    path.write_text(
        HEADER
        + "\nrandom,grid,2d,0,200,100,0,nan,nan,0.830000,100"
        + "\npomcp,grid,2d,4,200,100,88,68.0,49.0,1.0,12\n"
    )
    out = tmp_path / "steps.png"
    render_figure(FigureSpec(path, "steps", out))
    assert _is_png(out)


def test_input_csv_never_mutated(matrix_csv, tmp_path):
    before = matrix_csv.read_bytes()
    render_all(matrix_csv, tmp_path / "figs")
    assert matrix_csv.read_bytes() == before


def test_rendering_is_byte_stable(matrix_csv, tmp_path):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    render_figure(FigureSpec(matrix_csv, "success", a))
    render_figure(FigureSpec(matrix_csv, "success", b))
    assert a.read_bytes() == b.read_bytes()


def test_cli_single_and_all(matrix_csv, tmp_path):
    out = tmp_path / "success.png"
    assert cli_main(["--csv", str(matrix_csv), "--kind", "success", "--out", str(out)]) == 0
    assert _is_png(out)
    assert cli_main(["--csv", str(matrix_csv), "--all", "--out-dir", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "ablation.png").exists()


def test_cli_rejects_bad_csv(tmp_path, capsys):
    path = tmp_path / "missing.csv"
    path.write_text("policy,n_sim\npomcp,4\n")
    code = cli_main(["--csv", str(path), "--kind", "success", "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "row 1" in capsys.readouterr().err


def test_unknown_kind_rejected(matrix_csv, tmp_path):
    with pytest.raises(ValidationError, match="unknown figure kind"):
        FigureSpec(matrix_csv, "pie", tmp_path / "x.png")
