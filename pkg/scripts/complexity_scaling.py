#!/usr/bin/env python3
"""Arithmetic cost of the estimator versus grid and band sizes.

Two sweeps, both reading the per-stage multiply counters that the
scenario runner charges:

  * uplink width at fixed P: the polynomial (pilot) stage should not
    move, the per-subcarrier channel stage should scale linearly;
  * grid size with both cancellers: total estimation multiplies of the
    proposed two-stage estimator against the per-subcarrier full LS
    baseline, plus running-stage multiplies per data symbol.

Example:
    python3 scripts/complexity_scaling.py
"""

from __future__ import annotations

import argparse

import numpy as np

from flexsic.scenario import ScenarioSpec, run_scenario

RUN_STAGES = ("run", "run_basis", "full_ls_run", "full_ls_run_basis", "linear_run")


def estimation_mults(counter) -> int:
    return counter.total_mults([s for s in counter.stages if s not in RUN_STAGES])


def sweep_uplink_width(widths: list[int]) -> None:
    # pa_only canceller: the one-sided downlink span has no mirror pairs,
    # so the IQ stage is unidentifiable here; the two stages under test
    # are charged identically either way.
    print("uplink-width sweep (P = 1024, downlink fixed at 301 subcarriers)")
    print(f"  {'|UL|':>5s} {'estimate_pa':>12s} {'estimate_channel':>17s}")
    for width in widths:
        spec = ScenarioSpec(
            num_subcarriers=1024,
            duplex="custom",
            dl_span=(100, 400),
            ul_span=(500, 500 + width - 1),
            n_run_symbols=2,
            seed=3,
            cancellers=("pa_only",),
        )
        ctr = run_scenario(spec).counters["pa_only"]
        print(
            f"  {width:5d} {ctr.mults('estimate_pa'):12,d} "
            f"{ctr.mults('estimate_channel'):17,d}"
        )


def sweep_grid_size(sizes: list[int]) -> None:
    print("\ngrid-size sweep (sbfd preset, k_max = 2)")
    header = (
        f"  {'P':>5s} {'proposed est':>13s} {'full LS est':>12s} "
        f"{'run/sym':>8s} {'full run/sym':>13s} {'|UL|(k+1)':>10s}"
    )
    print(header)
    for p in sizes:
        spec = ScenarioSpec(
            num_subcarriers=p,
            cp_length=p // 8 if p >= 512 else 32,
            duplex="sbfd",
            n_run_symbols=2,
            seed=1,
            cancellers=("proposed", "full_ls"),
        )
        rep = run_scenario(spec)
        grid = spec.build_grid()
        prop = rep.counters["proposed"]
        full = rep.counters["full_ls"]
        run_sym = prop.mults("run") / spec.n_run_symbols
        full_sym = full.mults("full_ls_run") / spec.n_run_symbols
        bound = grid.ul_size * (spec.k_max + 1)
        print(
            f"  {p:5d} {estimation_mults(prop):13,d} {estimation_mults(full):12,d} "
            f"{run_sym:8.0f} {full_sym:13.0f} {bound:10d}"
        )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--widths", nargs="+", type=int, default=[64, 128, 256])
    parser.add_argument("--sizes", nargs="+", type=int, default=[256, 512, 1024, 2048])
    args = parser.parse_args(argv)
    np.set_printoptions(suppress=True)
    sweep_uplink_width(args.widths)
    sweep_grid_size(args.sizes)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
