import pytest
from openpyxl import load_workbook

from config import EXIT_OK, EXIT_USAGE
from instance_io import read_instance
from main import main


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "random.txt"
    assert main(["gen", "--seed", "2", "--states", "3", "--actions", "2", "--out", str(path)]) == EXIT_OK
    return path


def test_gen_writes_instance(capsys, instance_file):
    m = read_instance(str(instance_file))
    assert (m.num_states, m.num_actions, m.num_objectives) == (3, 2, 2)
    assert m.seed == 2
    assert "wrote random-2-3x2x2" in capsys.readouterr().out


def test_cover_greedy_lorenz(capsys):
    code = main(["cover", "--in", "builtin:example2:30", "--method", "greedy", "--epsilon", "0.2"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "cover size: 1" in out
    assert "wall-clock seconds: " in out
    assert "entry\tz1\tz2" in out


def test_cover_writes_table_and_workbook(tmp_path, capsys):
    table = tmp_path / "cover.tsv"
    plot = tmp_path / "plot.tsv"
    workbook = tmp_path / "cover.xlsx"
    code = main(["cover", "--in", "builtin:example1:4", "--epsilon", "0.1",
                 "--out", str(table), "--plot", str(plot), "--excel", str(workbook)])
    assert code == EXIT_OK
    assert table.read_text().startswith("entry\t")
    assert "frontier" in plot.read_text()
    book = load_workbook(workbook)
    assert book.sheetnames == ["Cover", "Frontier", "Summary"]
    keys = [row[0] for row in book["Summary"].iter_rows(values_only=True)]
    assert "seconds" in keys and "queries" in keys
    assert "wall-clock seconds: " in capsys.readouterr().out


def test_check_pareto_grid(capsys):
    code = main(["check", "--in", "builtin:example1:10", "--space", "pareto", "--epsilon", "0.1"])
    assert code == EXIT_OK
    assert "verification: ok" in capsys.readouterr().out


def test_check_generated_instance(instance_file, capsys):
    code = main(["check", "--in", str(instance_file), "--space", "pareto", "--method", "greedy",
                 "--epsilon", "0.25"])
    assert code == EXIT_OK
    assert "verification: ok" in capsys.readouterr().out


def test_stats(instance_file, capsys):
    assert main(["stats", "--in", str(instance_file), "--epsilon", "0.1", "0.5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "deterministic policies: 8" in out
    assert out.count("pareto_grid ") == 2


@pytest.mark.parametrize("argv", [
    ["cover", "--in", "builtin:example2:10", "--method", "two-phase", "--space", "pareto", "--epsilon", "0.1"],
    ["cover", "--in", "builtin:example7:10", "--epsilon", "0.1"],
    ["cover", "--in", "builtin:example2:10"],
    ["cover", "--in", "builtin:example2:10", "--epsilon", "0.1", "--method", "simplex"],
    ["check", "--in", "missing-instance.txt", "--epsilon", "0.1"],
    ["sizes", "--in", "builtin:example1-mdp:3"],
    ["cover", "--in", "builtin:example1-mdp:3", "--epsilon", "0.1", "--profile", "turbo"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE
