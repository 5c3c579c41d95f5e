#!/usr/bin/env python3
"""Records data/fixtures/cassettes/stub_chat.ndjson through the real CLI.

A local chat-completions stub answers with seasonal-naive numbers wrapped in
the kind of clutter real models add (prose, code fences, a value count in the
preamble). Every value served is logged, and the expected replay MAE of each
cell is computed here from those values and the fixture CSVs alone, then
frozen in data/reference/cassette_expected.json.

usage: scripts/record_cassette_fixture.py [path/to/tsprompt]
"""

import csv
import http.server
import json
import math
import os
import pathlib
import re
import statistics
import subprocess
import sys
import tempfile
import threading

ROOT = pathlib.Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "cassette_fixture.json"
CASSETTE = ROOT / "data" / "fixtures" / "cassettes" / "stub_chat.ndjson"
EXPECTED = ROOT / "data" / "reference" / "cassette_expected.json"
NAIVE_OVERRUN = 36

requests = {}  # prompt text -> list of digit lists, one per choice


def history_digits(prompt):
    """Longest run of comma-separated integers in the prompt."""
    runs = re.findall(r"-?\d+(?:, -?\d+)+", prompt)
    best = max(runs, key=len)
    return [int(t) for t in best.split(", ")]


def horizon_of(prompt):
    m = re.search(r"next (\d+) values", prompt)
    return int(m.group(1)) if m else NAIVE_OVERRUN


def choice_text(values, index, count):
    body = ", ".join(str(v) for v in values)
    if index % 3 == 0:
        return ("Sure! Here is my forecast for the series:\n\n" + body +
                "\n\nThese values continue the seasonal pattern.")
    if index % 3 == 1:
        return "```\n" + body + "\n```"
    return "Here are the next %d values: %s" % (count, body)


def answer(prompt, n):
    hist = history_digits(prompt)
    h = horizon_of(prompt)
    period = 12 if len(hist) >= 24 else 4
    base = [hist[len(hist) - period + t % period] for t in range(h)]
    salt = len(prompt)
    choices = []
    for i in range(n):
        vals = [b + ((t * 7 + i * 13 + salt) % 21 - 10) * 100 for t, b in enumerate(base)]
        choices.append(vals)
    requests[prompt] = choices
    return [choice_text(v, i, len(v)) for i, v in enumerate(choices)]


class Handler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        prompt = body["messages"][-1]["content"]
        texts = answer(prompt, int(body.get("n", 1)))
        reply = {
            "id": "stub",
            "model": body["model"],
            "choices": [{"index": i, "message": {"role": "assistant", "content": t},
                         "finish_reason": "stop"} for i, t in enumerate(texts)],
            "usage": {"prompt_tokens": len(prompt) // 4,
                      "completion_tokens": sum(len(t) for t in texts) // 4},
        }
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def cells_for(ds):
    """(horizon, history, truth) per task, from the CSV and the split rules."""
    path = (CONFIG.parent / ds["source"]).resolve()
    with open(path, newline="") as f:
        rows = [r for r in csv.DictReader(f) if r[ds["target_column"]].strip()]
    values = [float(r[ds["target_column"]]) for r in rows]
    if "protocol" not in ds:
        h = math.ceil(0.2 * len(values))
        return [(h, values[:-h], values[-h:])]
    horizons = ds["protocol"]["horizons"]
    start = next(i for i, r in enumerate(rows) if r[ds["timestamp_column"]][:10] > ds["test_cutoff"])
    lookback = min(4 * max(horizons), 500)
    return [(h, values[start - lookback:start], values[start:start + h]) for h in horizons]


def find_request(strategy, history, h):
    """Naive prompts are the bare history; LSTPrompt ones state the horizon."""
    digits = ", ".join(str(round(v * 100)) for v in history)
    for prompt, choices in requests.items():
        if strategy == "naive" and prompt == digits + ", ":
            return choices
        if strategy == "lstprompt" and ("next %d values" % h) in prompt and digits in prompt:
            return choices
    raise SystemExit("no request recorded for %s H=%d" % (strategy, h))


def main():
    binary = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "build" / "tools" / "tsprompt"
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    CASSETTE.parent.mkdir(parents=True, exist_ok=True)
    if CASSETTE.exists():
        CASSETTE.unlink()
    env = dict(os.environ, TSPROMPT_API_BASE="http://127.0.0.1:%d/v1" % server.server_port,
               TSPROMPT_API_KEY="stub-key")
    with tempfile.TemporaryDirectory() as out:
        subprocess.run([str(binary), "record", str(CONFIG), "--cassette", str(CASSETTE),
                        "-o", out], check=True, env=env)
    server.shutdown()

    config = json.loads(CONFIG.read_text())
    cells = []
    for ds in config["datasets"]:
        for h, history, truth in cells_for(ds):
            for strategy in config["strategies"]:
                choices = find_request(strategy, history, h)
                forecast = [statistics.median(c[t] / 100 for c in choices) for t in range(h)]
                mae = math.fsum(abs(a - b) for a, b in zip(truth, forecast)) / h
                cells.append({"dataset": ds["name"], "horizon": h, "strategy": strategy,
                              "forecast": forecast, "mae": mae})
    EXPECTED.write_text(json.dumps({"generated_by": "scripts/record_cassette_fixture.py",
                                    "cassette": str(CASSETTE.relative_to(ROOT)),
                                    "cells": cells}, indent=2) + "\n")


if __name__ == "__main__":
    main()
