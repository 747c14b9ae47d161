#!/usr/bin/env python3
"""Full run protocol: baseline plus two impaired scenarios, then KS tables.

Simulates four 6000 s runs per scenario (about ten minutes per scenario on
one core), then writes self-similarity and cross-scenario rejection tables
next to the run directories.

    python scripts/run_protocol.py --out protocol
    python scripts/run_protocol.py --out quick --duration 600
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from plate_netsim.cli import main as cli
from plate_netsim.config import ScenarioConfig


def scenarios(seed: int, duration: float):
    base = ScenarioConfig(master_seed=seed, duration=duration)
    slow = dataclasses.replace(base, scenario_id="delay30", rto=0.15).with_links(delay=0.030)
    lossy = dataclasses.replace(base, scenario_id="loss10").with_links(loss=0.10)
    return [base, slow, lossy]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="protocol")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--duration", type=float, default=6000.0)
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    force = ["--force"] if args.force else []
    dirs = []
    for cfg in scenarios(args.seed, args.duration):
        path = out / f"{cfg.scenario_id}.json"
        path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        code = cli(["run", "--config", str(path), "--out", str(out)] + force)
        if code:
            return code
        dirs.append(str(out / cfg.scenario_id))
    for d in dirs:
        cli(["selfsim", d] + force)
    for other in dirs[1:]:
        cli(["compare", dirs[0], other] + force)
    return cli(["report", *dirs, "--out", str(out / "summary")] + force)


if __name__ == "__main__":
    sys.exit(main())
