"""Result container and the delimited output contract.

Every experiment produces the same column set; fields that do not apply
stay empty. Float formatting goes through ``repr`` so that equal seeds
and configs yield byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

COLUMNS = (
    "scenario_id",
    "rep",
    "d_true_m",
    "d_set_m",
    "d_est_m",
    "dissimilarity",
    "verdict",
    "rss_dbm",
    "decision",
    "seed",
)


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        # Plain-float repr also normalizes numpy scalars, which would
        # otherwise print their type name.
        return repr(float(value))
    return str(value)


def make_row(
    scenario_id: str,
    rep: int,
    seed: int,
    d_true_m: float | None = None,
    d_set_m: float | None = None,
    d_est_m: float | None = None,
    dissimilarity: float | None = None,
    verdict: str | None = None,
    rss_dbm: float | None = None,
    decision: str | None = None,
) -> dict:
    return {
        "scenario_id": scenario_id,
        "rep": rep,
        "d_true_m": d_true_m,
        "d_set_m": d_set_m,
        "d_est_m": d_est_m,
        "dissimilarity": dissimilarity,
        "verdict": verdict,
        "rss_dbm": rss_dbm,
        "decision": decision,
        "seed": seed,
    }


@dataclass
class ScenarioResult:
    """One experiment run: rows for the CSV plus a summary for humans."""

    experiment: str
    seed: int
    rows: list[dict]
    summary: dict
    config_echo: dict[str, str]
    columns: tuple[str, ...] = COLUMNS

    def render_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format_value(row.get(col)) for col in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, basename: str) -> tuple[Path, Path]:
        """Write the CSV and the resolved-config sidecar; returns both paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{basename}.csv"
        csv_path.write_text(self.render_csv(), encoding="utf-8")
        echo_path = out / f"{basename}.config.txt"
        echo_lines = [f"{key} = {value}" for key, value in self.config_echo.items()]
        echo_path.write_text("\n".join(echo_lines) + "\n", encoding="utf-8")
        return csv_path, echo_path


def summarize_estimates(rows: list[dict]) -> dict[str, dict]:
    """Per-cell mean/min/max over the d_est_m column, preserving order."""
    import numpy as np

    cells: dict[str, list[float]] = {}
    meta: dict[str, dict] = {}
    for row in rows:
        cid = row["scenario_id"]
        if row["d_est_m"] is None:
            continue
        cells.setdefault(cid, []).append(row["d_est_m"])
        meta.setdefault(cid, {"d_true_m": row["d_true_m"], "d_set_m": row["d_set_m"]})
    out: dict[str, dict] = {}
    for cid, values in cells.items():
        arr = np.asarray(values)
        out[cid] = {
            "count": int(arr.size),
            "mean_m": float(arr.mean()),
            "std_m": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "min_m": float(arr.min()),
            "max_m": float(arr.max()),
            **meta[cid],
        }
    return out
