import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from momdp_core import Space
from cover_grid import CoverSet, ExplicitBackend, LpBackend, lorenz_grid_cover, pareto_grid_cover
from oracle import example1_values
from report_generation import ReportGenerator


@pytest.fixture
def report():
    return ReportGenerator("builtin:example1:2")


@pytest.fixture
def lp_cover(self_loop_mdp):
    return pareto_grid_cover(LpBackend(self_loop_mdp), 0.5)


def test_cover_table_columns(report, lp_cover):
    df = report.cover_table(lp_cover)
    assert list(df.columns) == ["entry", "z1", "z2", "L1", "L2", "cell", "policy"]
    assert len(df) == 1
    row = df.iloc[0]
    assert row["z1"] == pytest.approx(20.0)
    assert row["L2"] == pytest.approx(60.0)
    assert row["cell"] != "-"
    assert row["policy"] != "-"


def test_cover_table_without_policies(report):
    cover = lorenz_grid_cover(ExplicitBackend(np.array([[3.0, 5.0]])), 0.5)
    df = report.cover_table(cover)
    assert df["policy"].tolist() == ["-"]
    assert report.cover_table(CoverSet((), 0.5, Space.PARETO)).empty


def test_frontier_table_of_family(report):
    df = report.frontier_table(example1_values(2), Space.LORENZ)
    assert df[["z1", "z2"]].values.tolist() == [[1.0, 2.0], [2.0, 1.0]]
    assert df["L1"].tolist() == [1.0, 1.0]
    assert df["L2"].tolist() == [3.0, 3.0]


def test_frontier_table_of_array(report):
    values = np.array([[1.0, 5.0], [2.0, 2.0], [4.0, 1.0]])
    df = report.frontier_table(values, Space.PARETO)
    assert len(df) == 2
    assert sorted(df["z1"].tolist()) == [1.0, 4.0]


def test_plot_data_series(report):
    values = example1_values(2)
    cover = lorenz_grid_cover(ExplicitBackend(values), 0.5)
    frontier = report.frontier_table(values, Space.LORENZ)
    df = report.plot_data(cover, frontier)
    assert list(df.columns) == ["series", "L1", "L2"]
    assert (df["series"] == "cover").sum() == len(cover)
    assert (df["series"] == "frontier").sum() == 2
    assert report.plot_data(CoverSet((), 0.5, Space.LORENZ)).empty


def test_policies_table(report, lp_cover):
    df = report.policies_table(lp_cover)
    assert df.to_dict("records") == [{"entry": 0, "state": 0, "a0": 1.0}]


def test_summary_table(report):
    df = report.summary_table({"size": 3, "epsilon": 0.1})
    assert df["key"].tolist() == ["input", "size", "epsilon"]
    assert df["value"].iloc[0] == "builtin:example1:2"


def test_write_table_csv_profile(tmp_path, lp_cover):
    report = ReportGenerator("self-loop", "csv")
    path = tmp_path / "cover.csv"
    report.write_table(report.cover_table(lp_cover), str(path))
    back = pd.read_csv(path)
    assert back["z2"].tolist() == pytest.approx([40.0])
    assert "," in path.read_text().splitlines()[0]


def test_export_to_excel_skips_empty_tables(tmp_path, report, lp_cover):
    path = tmp_path / "cover.xlsx"
    report.export_to_excel({
        "cover": report.cover_table(lp_cover),
        "frontier": pd.DataFrame(),
        "summary": report.summary_table({"size": len(lp_cover)}),
        "policies": report.policies_table(lp_cover),
    }, str(path))
    assert load_workbook(path).sheetnames == ["Cover", "Summary", "Policies"]


def test_unknown_export_profile():
    with pytest.raises(KeyError):
        ReportGenerator("x", "parquet")
