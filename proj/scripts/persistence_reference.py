#!/usr/bin/env python3
"""Computes persistence-forecast errors on the fixtures from first principles.

Written against the CSV files only (no project code): split or cutoff rule,
last observed value repeated, mean absolute error, and the error divided by
the population std of everything before the target. Writes
data/reference/persistence_oracle.json, which the acceptance test reads.
"""

import csv
import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIX = ROOT / "data" / "fixtures"
CUTOFF = "2023-06-30"

DATASETS = [
    # name, file, date column, target column, horizons (None = last 20%)
    ("AirPassengers", "air_passengers.csv", "Month", "Passengers", None),
    ("Milk-synthetic", "milk_synthetic.csv", "Month", "Production", None),
    ("Periodic", "periodic.csv", "Month", "Value", None),
    ("ILI-synthetic", "ili_synthetic.csv", "WEEK_START", "ILITOTAL", [4, 12, 20, 24]),
    ("Stock-synthetic", "stock_synthetic.csv", "Date", "Open", [24, 48, 96, 120]),
    ("Weather-synthetic", "weather_synthetic.csv", "date", "tavg", [24, 48, 96, 120]),
]


def load(path, date_col, value_col):
    with open(path, newline="") as f:
        rows = [r for r in csv.DictReader(f) if r[value_col].strip()]
    return [r[date_col] for r in rows], [float(r[value_col]) for r in rows]


def population_std(xs):
    mean = math.fsum(xs) / len(xs)
    return math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / len(xs))


def score(history, target):
    last = history[-1]
    abs_err = [abs(t - last) for t in target]
    mae = math.fsum(abs_err) / len(abs_err)
    return {"horizon": len(target), "last_value": last, "mae": mae,
            "normalized_mae": mae / population_std(history)}


def main():
    out = []
    for name, file, date_col, value_col, horizons in DATASETS:
        dates, values = load(FIX / file, date_col, value_col)
        n = len(values)
        if horizons is None:
            test = math.ceil(0.2 * n)
            entry = score(values[: n - test], values[n - test:])
            entry["dataset"] = name
            out.append(entry)
            continue
        # Dates are ISO strings, so string order is date order.
        start = next(i for i, d in enumerate(dates) if d[:10] > CUTOFF)
        for h in horizons:
            entry = score(values[:start], values[start:start + h])
            entry["dataset"] = name
            entry["first_target_date"] = dates[start]
            out.append(entry)
    path = ROOT / "data" / "reference" / "persistence_oracle.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"generated_by": "scripts/persistence_reference.py",
                                "tasks": out}, indent=2) + "\n")


if __name__ == "__main__":
    main()
