"""Repeat the toy pipeline over many master seeds and tabulate s*, epsilon and the validation frequency.

    python3 scripts/toy_soundness.py --seeds 20
"""

import argparse
import tempfile
from pathlib import Path

from scenario_tune import pipeline
from scenario_tune.config import load_config

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "toy.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--config", default=str(CONFIG))
    args = ap.parse_args()
    quiet = lambda *a, **k: None  # noqa: E731
    print(f"{'seed':>4} {'s*':>4} {'epsilon':>10} {'freq':>10} verdict")
    fails = 0
    with tempfile.TemporaryDirectory() as tmp:
        for seed in range(args.seeds):
            cfg = load_config(args.config, seed=seed, out_dir=Path(tmp) / str(seed))
            pipeline.cmd_tune(cfg, echo=quiet)
            pipeline.cmd_evaluate(cfg, echo=quiet)
            cert = pipeline.cmd_certify(cfg, echo=quiet)
            v = pipeline.cmd_validate(cfg, echo=quiet)
            fails += not v["pass"]
            print(f"{seed:>4} {cert['s_star']:>4} {v['epsilon']:>10.6g} {v['frequency']:>10.6g} "
                  f"{'PASS' if v['pass'] else 'FAIL'}", flush=True)
    print(f"{args.seeds - fails}/{args.seeds} repetitions within the certified bound")


if __name__ == "__main__":
    main()
