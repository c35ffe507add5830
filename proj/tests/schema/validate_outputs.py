#!/usr/bin/env python3
"""Run quick CLI commands on the shipped configs and validate their JSON output."""
import json
import pathlib
import subprocess
import sys

import jsonschema

QUICK = ["--samples", "20000", "--scale-n", "500", "--reps", "10"]

RUNS = [
    ("region", "symmetric.cfg", []),
    ("region", "symmetric.cfg", ["--region", "slc-plus", "--gamma", "1"]),
    ("vol", "symmetric.cfg", QUICK),
    ("sr", "symmetric.cfg", QUICK + ["--gamma", "2"]),
    ("gamma0", "symmetric.cfg", []),
    ("gamma0", "symmetric.cfg", ["--rho", "[0.4, 0.4]"]),
    ("gamma1", "asymmetric_k2.cfg", []),
    ("gamma-opt", "three_queues.cfg", ["--samples", "20000", "--set", "grid=21"]),
    ("simulate", "symmetric.cfg", QUICK + ["--horizon", "100"]),
    ("simulate", "static_split.cfg", QUICK),
    ("drift", "symmetric.cfg", QUICK),
    ("tfl", "symmetric.cfg", QUICK),
    ("prop41", None, QUICK + ["--set", "pilot_horizon=1e4"]),
    ("slc-plus-gap", None, QUICK),
    ("oracle-check", None, ["--mode", "grid", "--set", "caps=[25, 50]"]),
    ("oracle-check", None, ["--mode", "sim", "--set", "instances=2", "--set", "sim_horizon=2e4"]),
    ("oracle-check", "symmetric.cfg", ["--mode", "export", "--cap", "4", "--rho", "[0.1, 0.1]"]),
]


def main() -> int:
    msr, schemas, configs = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    failures = 0
    for command, config, extra in RUNS:
        args = [msr, command] + (["--config", str(configs / config)] if config else []) + extra
        proc = subprocess.run(args, capture_output=True, text=True)
        label = " ".join([command] + ([config] if config else []) + extra)
        if proc.returncode not in (0, 3):
            print(f"FAIL {label}: exit {proc.returncode}: {proc.stderr.strip()}")
            failures += 1
            continue
        schema = json.loads((schemas / f"{command}.schema.json").read_text())
        try:
            jsonschema.validate(json.loads(proc.stdout), schema)
            print(f"ok   {label}")
        except jsonschema.ValidationError as e:
            print(f"FAIL {label}: {e.message}")
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
