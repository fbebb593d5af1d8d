import logging

import numpy as np
import pandas as pd

from config import get_effective_settings
from momdp_core import Space, nondominated_filter, space_image
from value_sets import LinearFamilySet

logger = logging.getLogger(__name__)


class ReportGenerator:
    """
    Turns cover runs into pandas tables and writes them out.

    - cover table: one row per cover entry (value vector, Lorenz vector, cell, policy)
    - plot data: one row per cover / frontier point in the cover's space
    - summary: key / value rows describing the run
    - policies: one row per state and entry with the action distribution
    - delimited text files and a multi-sheet Excel workbook
    """

    def __init__(self, label: str, profile: str = None):
        self.label = label
        self.settings = get_effective_settings("export", profile)

    # ------------------------------------------------------------------
    # 1) TABLES
    # ------------------------------------------------------------------
    @staticmethod
    def _columns(prefix: str, n: int):
        return [f"{prefix}{i}" for i in range(1, n + 1)]

    def cover_table(self, cover) -> pd.DataFrame:
        """
        Cover entries in cover order.

        Columns: entry, z1..zn, L1..Ln, cell (space-separated indices or '-'),
        policy ('-' when the backend does not produce policies).
        """
        if not cover.entries:
            return pd.DataFrame(columns=["entry", "cell", "policy"])
        n = cover.entries[0].value.size
        rows = []
        for k, entry in enumerate(cover.entries):
            row = {"entry": k}
            row.update(zip(self._columns("z", n), entry.value.tolist()))
            row.update(zip(self._columns("L", n), entry.lorenz.tolist()))
            row["cell"] = " ".join(str(p) for p in entry.cell) if entry.cell else "-"
            row["policy"] = entry.policy.describe() if entry.policy is not None else "-"
            rows.append(row)
        return pd.DataFrame(rows)

    def frontier_table(self, values, space: Space) -> pd.DataFrame:
        """Exact nondominated points, or an empty table when there are too many to list."""
        if isinstance(values, LinearFamilySet):
            lo, hi = values.nondominated_interval(space)
            limit = get_effective_settings("oracle")["materialize_limit"]
            if hi - lo + 1 > limit:
                logger.info(f"frontier of {hi - lo + 1} points not tabulated (limit {limit})")
                return pd.DataFrame()
            x = np.arange(lo, hi + 1, dtype=float)
            frontier = np.column_stack([x, values.intercept + values.slope * x])
        else:
            frontier = nondominated_filter(np.asarray(values, dtype=float), space)
        n = frontier.shape[1]
        df = pd.DataFrame(frontier, columns=self._columns("z", n))
        lorenz = space_image(frontier, Space.LORENZ)
        for i, col in enumerate(self._columns("L", n)):
            df[col] = lorenz[:, i]
        return df

    def plot_data(self, cover, frontier_df: pd.DataFrame = None) -> pd.DataFrame:
        """
        One row per point: series ('cover' or 'frontier') and the coordinates
        the cover is judged on (z in Pareto space, L in Lorenz space).
        """
        prefix = "L" if cover.space is Space.LORENZ else "z"
        frames = []
        if cover.entries:
            images = cover.images()
            df = pd.DataFrame(images, columns=self._columns(prefix, images.shape[1]))
            df.insert(0, "series", "cover")
            frames.append(df)
        if frontier_df is not None and not frontier_df.empty:
            cols = [c for c in frontier_df.columns if c.startswith(prefix)]
            df = frontier_df[cols].copy()
            df.insert(0, "series", "frontier")
            frames.append(df)
        if not frames:
            return pd.DataFrame(columns=["series"])
        return pd.concat(frames, ignore_index=True)

    def summary_table(self, info: dict) -> pd.DataFrame:
        rows = [{"key": "input", "value": self.label}]
        rows += [{"key": str(k), "value": v} for k, v in info.items()]
        return pd.DataFrame(rows)

    def policies_table(self, cover) -> pd.DataFrame:
        rows = []
        for k, entry in enumerate(cover.entries):
            if entry.policy is None:
                continue
            probs = entry.policy.probabilities
            for s in range(probs.shape[0]):
                row = {"entry": k, "state": s}
                row.update({f"a{a}": float(probs[s, a]) for a in range(probs.shape[1])})
                rows.append(row)
        return pd.DataFrame(rows)

    # ------------------------------------------------------------------
    # 2) WRITERS
    # ------------------------------------------------------------------
    def write_table(self, df: pd.DataFrame, path: str):
        df.to_csv(path, sep=self.settings["delimiter"], index=False, lineterminator="\n")
        logger.info(f"wrote {len(df)} rows to {path}")

    def export_to_excel(self, tables: dict, output):
        """
        Write a workbook with one sheet per table, in this order:
        Cover, Frontier, Summary, Policies (empty tables are left out).
        """
        names = self.settings["sheet_names"]
        with pd.ExcelWriter(output, engine=self.settings["excel_engine"]) as writer:
            for key in ("cover", "frontier", "summary", "policies"):
                df = tables.get(key)
                if df is None or df.empty:
                    continue
                df.to_excel(writer, sheet_name=names[key], index=False)
                worksheet = writer.sheets[names[key]]
                for i, col in enumerate(df.columns):
                    width = max(len(str(col)), int(df[col].astype(str).str.len().max() or 0))
                    worksheet.set_column(i, i, min(width + 2, 60))
        logger.info(f"wrote workbook {output}")
