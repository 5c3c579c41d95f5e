#!/usr/bin/env python3
"""Regenerates the checked-in fixtures under data/fixtures.

AirPassengers is the public monthly series (1949-1960). Every other file is
a synthetic stand-in with the same shape as the named source (column layout,
frequency, dates spanning 2023-06-30); none of them carries real data.
Output is deterministic for a given seed.
"""

import argparse
import csv
import datetime as dt
import json
import math
import pathlib
import random

AIR_PASSENGERS = [
    112, 118, 132, 129, 121, 135, 148, 148, 136, 119, 104, 118,
    115, 126, 141, 135, 125, 149, 170, 170, 158, 133, 114, 140,
    145, 150, 178, 163, 172, 178, 199, 199, 184, 162, 146, 166,
    171, 180, 193, 181, 183, 218, 230, 242, 209, 191, 172, 194,
    196, 196, 236, 235, 229, 243, 264, 272, 237, 211, 180, 201,
    204, 188, 235, 227, 234, 264, 302, 293, 259, 229, 203, 229,
    242, 233, 267, 269, 270, 315, 364, 347, 312, 274, 237, 278,
    284, 277, 317, 313, 318, 374, 413, 405, 355, 306, 271, 306,
    315, 301, 356, 348, 355, 422, 465, 467, 404, 347, 305, 336,
    340, 318, 362, 348, 363, 435, 491, 505, 404, 359, 310, 337,
    360, 342, 406, 396, 420, 472, 548, 559, 463, 407, 362, 405,
    417, 391, 419, 461, 472, 535, 622, 606, 508, 461, 390, 432,
]


def month_starts(year, month, count):
    out = []
    for i in range(count):
        y, m = divmod(month - 1 + i, 12)
        out.append(dt.date(year + y, m + 1, 1))
    return out


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def air_passengers(out):
    assert len(AIR_PASSENGERS) == 144 and sum(AIR_PASSENGERS) == 40363
    dates = month_starts(1949, 1, 144)
    write_csv(out / "air_passengers.csv", ["Month", "Passengers"],
              [[d.strftime("%Y-%m"), v] for d, v in zip(dates, AIR_PASSENGERS)])
    bundle = out / "bundle"
    bundle.mkdir(exist_ok=True)
    (bundle / "AirPassengers.txt").write_text("".join(f"{v}\n" for v in AIR_PASSENGERS))
    (bundle / "Periodic.txt").write_text("".join(f"{v}\n" for v in periodic_values()))
    manifest = {"series": [
        {"name": "AirPassengers", "file": "AirPassengers.txt", "frequency": "month",
         "start": "1949-01-01"},
        {"name": "Periodic", "file": "Periodic.txt", "frequency": "month",
         "start": "2000-01-01"},
    ]}
    (bundle / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def periodic_values():
    cycle = [20, 24, 31, 38, 45, 51, 55, 53, 46, 37, 28, 22]
    return cycle * 8


def periodic(out):
    values = periodic_values()
    dates = month_starts(2000, 1, len(values))
    write_csv(out / "periodic.csv", ["Month", "Value"],
              [[d.strftime("%Y-%m"), v] for d, v in zip(dates, values)])


def milk(out, rng):
    dates = month_starts(1962, 1, 168)
    season = [0, -30, 40, 55, 95, 70, 30, -5, -45, -35, -60, -25]
    rows = []
    for i, d in enumerate(dates):
        v = 600 + 1.7 * i + season[i % 12] + rng.gauss(0, 6)
        rows.append([d.strftime("%Y-%m"), f"{v:.1f}"])
    write_csv(out / "milk_synthetic.csv", ["Month", "Production"], rows)


def ili(out, rng):
    start = dt.date(2020, 1, 6)
    rows = []
    for i in range(220):
        d = start + dt.timedelta(weeks=i)
        phase = 2 * math.pi * (d.timetuple().tm_yday / 365.25)
        level = 12000 + 9000 * max(0.0, math.cos(phase)) ** 3
        total = int(round(level + rng.gauss(0, 600)))
        patients = int(round(total * 40 + rng.gauss(0, 2000)))
        rows.append([d.isoformat(), total, patients])
    write_csv(out / "ili_synthetic.csv", ["WEEK_START", "ILITOTAL", "TOTAL_PATIENTS"], rows)


def stock(out, rng):
    d = dt.date(2021, 1, 4)
    end = dt.date(2024, 1, 31)
    price = 86.0
    rows = []
    while d <= end:
        if d.weekday() < 5:
            open_ = price * math.exp(rng.gauss(0.0003, 0.004))
            close = open_ * math.exp(rng.gauss(0.0, 0.015))
            high = max(open_, close) * (1 + abs(rng.gauss(0, 0.006)))
            low = min(open_, close) * (1 - abs(rng.gauss(0, 0.006)))
            volume = int(rng.uniform(1.5e7, 4.5e7))
            rows.append([d.isoformat(), f"{open_:.2f}", f"{high:.2f}", f"{low:.2f}",
                         f"{close:.2f}", f"{close:.2f}", volume])
            price = close
        d += dt.timedelta(days=1)
    write_csv(out / "stock_synthetic.csv",
              ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"], rows)


def weather(out, rng):
    d = dt.date(2021, 6, 1)
    end = dt.date(2023, 12, 31)
    rows = []
    while d <= end:
        doy = d.timetuple().tm_yday
        tavg = 12.0 - 9.5 * math.cos(2 * math.pi * (doy - 15) / 365.25) + rng.gauss(0, 2.0)
        spread = abs(rng.gauss(4.5, 1.2))
        prcp = max(0.0, rng.gauss(-1.0, 4.0))
        rows.append([d.isoformat(), f"{tavg:.1f}", f"{tavg - spread:.1f}",
                     f"{tavg + spread:.1f}", f"{prcp:.1f}", "0.0",
                     int(rng.uniform(0, 360)), f"{abs(rng.gauss(12, 4)):.1f}",
                     f"{rng.gauss(1015, 7):.1f}", ""])
        d += dt.timedelta(days=1)
    write_csv(out / "weather_synthetic.csv",
              ["date", "tavg", "tmin", "tmax", "prcp", "snow", "wdir", "wspd", "pres", "tsun"],
              rows)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=pathlib.Path(__file__).resolve().parent.parent / "data" / "fixtures")
    ap.add_argument("--seed", type=int, default=20231015)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    air_passengers(out)
    periodic(out)
    milk(out, rng)
    ili(out, rng)
    stock(out, rng)
    weather(out, rng)


if __name__ == "__main__":
    main()
