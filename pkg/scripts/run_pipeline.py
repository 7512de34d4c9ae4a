"""Run tune -> evaluate -> certify -> validate -> report for one config and print timings.

    python3 scripts/run_pipeline.py configs/reactor.json --threads 4
"""

import argparse
import time

from scenario_tune import pipeline
from scenario_tune.cli import _threads
from scenario_tune.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", help="integer or 'max'")
    ap.add_argument("--skip-tune", action="store_true", help="reuse an existing candidates.json")
    args = ap.parse_args()
    cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
    threads = _threads(args.threads)
    stages = [
        ("tune", lambda: pipeline.cmd_tune(cfg, threads=threads)),
        ("evaluate", lambda: pipeline.cmd_evaluate(cfg, threads=threads)),
        ("certify", lambda: pipeline.cmd_certify(cfg)),
        ("validate", lambda: pipeline.cmd_validate(cfg)),
        ("report", lambda: pipeline.cmd_report(cfg)),
    ]
    if args.skip_tune:
        stages = stages[1:]
    for name, fn in stages:
        t = time.perf_counter()
        print(f"== {name}", flush=True)
        fn()
        print(f"== {name} done in {time.perf_counter() - t:.1f} s", flush=True)


if __name__ == "__main__":
    main()
