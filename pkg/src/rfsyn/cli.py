"""Command-line entry point for the synthesis flow.

Exit codes: 0 when the flow finishes with every target met, 2 when the
respin loop gives up, 1 on any error (bad arguments, infeasible layout,
singular network, ...).
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .errors import RfsynError
from .flow import RunConfig, ablation_mode, run_flow


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rfsyn",
        description="Amplifier synthesis: sizing, layout, power grid, and "
                    "S-parameter verification from a JSON specification.")
    p.add_argument("--spec", required=True, help="circuit spec JSON")
    p.add_argument("--tech", default=None,
                   help="technology JSON (default: shipped generic 9-metal)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0,
                   help="master seed for dataset sampling and training")
    p.add_argument("--stages", type=int, default=4, choices=(1, 2, 3, 4),
                   help="run stages 1..N (size, primitives, layout, verify)")
    p.add_argument("--ablation", action="store_true",
                   help="run EM-aware and EM-oblivious flows and compare")
    p.add_argument("--gap", type=float, default=0.05,
                   help="placement optimality gap target")
    p.add_argument("--time-limit", type=float, default=5.0,
                   help="placement solve budget in seconds (0 = greedy only)")
    p.add_argument("--dataset", default=None,
                   help="inductor dataset cache path (loaded if present)")
    p.add_argument("--model", default=None,
                   help="forest model cache path (loaded if present)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            spec_path=args.spec, tech_path=args.tech, out_dir=args.out,
            seed=args.seed, stages=args.stages, ablation=args.ablation,
            gap=args.gap, time_limit=args.time_limit,
            dataset_path=args.dataset, model_path=args.model)
        if config.ablation:
            doc = ablation_mode(config)
            aware = doc["em_aware"]["status"]
            blind = doc["oblivious"]["status"]
            shift = doc.get("shift_pct")
            print(f"ablation: em_aware={aware} oblivious={blind}"
                  + (f" f_center shift {shift:+.2f}%"
                     if shift is not None else ""))
            return 0 if aware == "done" else 2
        result = run_flow(config)
        if result.report is not None:
            r = result.report
            print(f"gain {r.g_db:.2f} dB  S11 {r.s11_db:.2f} dB  "
                  f"BW {r.bw_hz / 1e9:.2f} GHz  kappa_min {r.kappa_min:.2f}"
                  + (f"  NF {r.nf_db:.2f} dB" if r.nf_db is not None
                     else ""))
        if result.status == "done":
            print("Done")
            return 0
        print(f"GiveUp after {result.manifest['iterations']} respins")
        return 2
    except (RfsynError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
