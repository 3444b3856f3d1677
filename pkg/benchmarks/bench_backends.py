#!/usr/bin/env python3
"""Benchmark the pure-numpy kernels against the compiled backend.

Checks that both implementations agree bit for bit on shared inputs,
times each hot kernel, then runs a full trial under each backend (in
subprocesses, since the backend is frozen at import time) and compares
the output CSVs byte for byte.

Usage:
    python3 benchmarks/bench_backends.py [--repeat N] [--scenario FILE]
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from cavesim.accel import _numpy_impl
from cavesim.vehicle import VehicleParams

ROOT = Path(__file__).resolve().parent.parent

_TRIAL_SNIPPET = """
import dataclasses, hashlib, json, os, sys, tempfile, time
import cavesim.accel as accel
from cavesim.simcli import load_scenario
from cavesim.simloop import run_trial

scenario = load_scenario(sys.argv[1])
run_trial(dataclasses.replace(scenario, duration=2.0))  # warm the kernels
with tempfile.TemporaryDirectory() as td:
    t0 = time.perf_counter()
    run_trial(scenario, out_dir=td)
    elapsed = time.perf_counter() - t0
    with open(os.path.join(td, "trial.csv"), "rb") as f:
        digest = hashlib.sha256(f.read()).hexdigest()
print(json.dumps({"backend": accel.BACKEND, "elapsed": elapsed,
                  "digest": digest}))
"""


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_inputs():
    rng = np.random.default_rng(7)
    n = 40
    segs = np.column_stack([
        rng.uniform(-50.0, 530.0, n), rng.uniform(-50.0, 430.0, n),
        rng.uniform(-50.0, 530.0, n), rng.uniform(-50.0, 430.0, n),
        rng.uniform(0.5, 6.0, n), rng.uniform(0.5, 6.0, n),
    ])
    s = np.concatenate([
        rng.uniform(-5.0, 5.0, 3), rng.uniform(-1.0, 1.0, 3),
        rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3), [12.0],
    ])
    wrench = np.array([20.0, -5.0, 0.0, 3.0])
    cur = np.array([0.05, -0.03, 0.0])
    return segs, s, _att_trig(s), wrench, cur


def _att_trig(s):
    # the kernel takes attitude trig precomputed; see cavesim.accel._core
    return np.array([np.cos(s[3]), np.sin(s[3]), np.cos(s[4]), np.sin(s[4]),
                     np.cos(s[5]), np.sin(s[5])])


def _run_trial_subprocess(flag, scenario):
    env = dict(os.environ, CAVESIM_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", _TRIAL_SNIPPET, scenario],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5,
                    help="timing repeats per kernel (best is reported)")
    ap.add_argument("--scenario",
                    default=str(ROOT / "scenarios" / "rectangle_calm.yaml"),
                    help="scenario for the end-to-end trial comparison")
    args = ap.parse_args(argv)

    try:
        from cavesim.accel import _numba_impl
    except ImportError:
        print("compiled backend unavailable (numba not installed); "
              "nothing to compare", file=sys.stderr)
        return 1

    segs, s, trig, wrench, cur = _bench_inputs()
    par = VehicleParams().kernel_params()
    rng = np.random.default_rng(11)

    # agreement first: timing a kernel that diverges would be meaningless
    mask_np = _numpy_impl.rasterize_capsules(segs, 384, 480)
    mask_nb = _numba_impl.rasterize_capsules(segs, 384, 480)
    assert np.array_equal(mask_np, mask_nb), "rasterize mismatch"
    lab_np, n_np = _numpy_impl.label_components(mask_np)
    lab_nb, n_nb = _numba_impl.label_components(mask_np)
    assert n_np == n_nb and np.array_equal(lab_np, lab_nb), "label mismatch"
    out_np, out_nb = np.empty(13), np.empty(13)
    for _ in range(100):
        si = np.concatenate([
            rng.uniform(-5.0, 5.0, 3), rng.uniform(-1.0, 1.0, 3),
            rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3),
            rng.uniform(0.0, 100.0, 1),
        ])
        ti = _att_trig(si)
        _numpy_impl.step_body(si, wrench, par, ti, cur, 0.01, out_np)
        _numba_impl.step_body(si, wrench, par, ti, cur, 0.01, out_nb)
        assert np.array_equal(out_np, out_nb), "step_body mismatch"
    print("kernel agreement: rasterize ok, label ok, step_body ok "
          "(bit-identical)")

    steps = 5000
    rows = []
    for name, np_fn, nb_fn, scale, unit in [
        ("rasterize 40 capsules 384x480",
         lambda: _numpy_impl.rasterize_capsules(segs, 384, 480),
         lambda: _numba_impl.rasterize_capsules(segs, 384, 480),
         1e3, "ms"),
        ("label 384x480",
         lambda: _numpy_impl.label_components(mask_np),
         lambda: _numba_impl.label_components(mask_np),
         1e3, "ms"),
        (f"step_body x{steps} (per call)",
         lambda: [_numpy_impl.step_body(s, wrench, par, trig, cur, 0.01,
                                        out_np) for _ in range(steps)],
         lambda: [_numba_impl.step_body(s, wrench, par, trig, cur, 0.01,
                                        out_nb) for _ in range(steps)],
         1e6 / steps, "us"),
    ]:
        nb_fn()  # trigger jit before the clock starts
        t_np = _best_of(np_fn, args.repeat) * scale
        t_nb = _best_of(nb_fn, args.repeat) * scale
        rows.append((name, t_np, t_nb, unit))

    print()
    trial_np = _run_trial_subprocess("0", args.scenario)
    trial_nb = _run_trial_subprocess("1", args.scenario)
    assert trial_np["backend"] == "numpy" and trial_nb["backend"] == "numba"
    rows.append((f"trial {Path(args.scenario).stem}",
                 trial_np["elapsed"], trial_nb["elapsed"], "s"))

    width = max(len(r[0]) for r in rows) + 2
    print(f"{'kernel':<{width}}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, t_np, t_nb, unit in rows:
        print(f"{name:<{width}}{t_np:>9.3f} {unit:<2}{t_nb:>9.3f} {unit:<2}"
              f"{t_np / t_nb:>9.1f}x")

    if trial_np["digest"] != trial_nb["digest"]:
        print("\ntrial CSVs DIFFER across backends", file=sys.stderr)
        return 1
    print("\ntrial CSVs: byte-identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
