"""
Cross-run report: collects evaluation summaries into tables and charts.
"""

import glob
import json
import logging
import os

import numpy as np
import pandas as pd

from config.corruptions import CORRUPTION_KINDS
from utils.evaluator import ID_CONDITION, METRIC_COLUMNS
from utils.exceptions import DataError
from visualizations.charts import (
    create_ablation_chart,
    create_condition_comparison_chart,
    save_figure,
)

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("Report")


def find_summaries(inputs):
    """
    Every summary.json under the given directories (or the files themselves).

    Args:
        inputs (list): Directories or summary.json paths

    Returns:
        list: Sorted file paths
    """
    found = []
    for item in inputs:
        if os.path.isfile(item):
            found.append(item)
        elif os.path.isdir(item):
            found.extend(glob.glob(os.path.join(item, "**", "summary.json"), recursive=True))
        else:
            raise DataError(f"Report input {item} does not exist")
    return sorted(set(found))


def collect_summaries(inputs):
    """
    Load evaluation summaries into one row per (run, condition).

    Returns:
        DataFrame: run, condition, kind, severity, metrics, router_accuracy
    """
    paths = find_summaries(inputs)
    if not paths:
        raise DataError(f"No summary.json found under {inputs}")
    rows = []
    for path in paths:
        with open(path) as f:
            summary = json.load(f)
        row = {
            "run": summary.get("run") or os.path.basename(os.path.dirname(os.path.dirname(path))),
            "condition": summary["condition"],
            "kind": summary.get("kind"),
            "severity": summary.get("severity"),
            "source": path,
        }
        for key in METRIC_COLUMNS + ["router_accuracy"]:
            value = summary["aggregate"].get(key)
            row[key] = np.nan if value is None else value
        rows.append(row)
    logger.info(f"Collected {len(rows)} evaluation summaries")
    return pd.DataFrame(rows)


def build_ablation_table(df, metric="p_aupro"):
    """
    One row per run: ID value, each corruption kind and the unweighted mean
    over the corruption kinds present.

    Args:
        df (DataFrame): Output of collect_summaries
        metric (str): Metric column

    Returns:
        DataFrame: run, id, <kind>..., mean_ood
    """
    table = df.pivot_table(index="run", columns="condition", values=metric, aggfunc="mean")
    result = pd.DataFrame({"run": table.index})
    result["id"] = table[ID_CONDITION].to_numpy() if ID_CONDITION in table.columns else np.nan
    ood_columns = []
    for kind in CORRUPTION_KINDS:
        columns = [c for c in table.columns if c.startswith(f"{kind}_s")]
        if columns:
            result[kind] = table[columns].mean(axis=1).to_numpy()
            ood_columns.append(kind)
    result["mean_ood"] = result[ood_columns].mean(axis=1) if ood_columns else np.nan
    return result.reset_index(drop=True)


def write_report(df, out_dir):
    """
    Write report.csv, report.xlsx and the comparison charts.

    Args:
        df (DataFrame): Output of collect_summaries
        out_dir (str): Target directory

    Returns:
        dict: Written file paths by kind
    """
    os.makedirs(out_dir, exist_ok=True)
    ablation = build_ablation_table(df)
    written = {"csv": os.path.join(out_dir, "report.csv"), "xlsx": os.path.join(out_dir, "report.xlsx")}
    df.to_csv(written["csv"], index=False)
    ablation.to_csv(os.path.join(out_dir, "ablation.csv"), index=False)

    with pd.ExcelWriter(written["xlsx"], engine="xlsxwriter") as writer:
        df.to_excel(writer, sheet_name="conditions", index=False)
        ablation.to_excel(writer, sheet_name="ablation", index=False)
        for metric in METRIC_COLUMNS:
            df.pivot_table(index="run", columns="condition", values=metric).to_excel(writer, sheet_name=metric)

    charts = []
    for metric in METRIC_COLUMNS:
        fig = create_condition_comparison_chart(df, metric)
        charts += save_figure(fig, os.path.join(out_dir, f"conditions_{metric}"))
    charts += save_figure(create_ablation_chart(ablation), os.path.join(out_dir, "ablation"))
    written["charts"] = charts

    logger.info(f"Report written to {out_dir} ({len(df)} rows, {len(ablation)} runs)")
    return written
