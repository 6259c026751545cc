# scripts/run_presets.py
"""
Runs every checked-in experiment config and writes one CSV per config
"""
import argparse
import glob
import logging
import os
import sys

# Add parent directory to path so we can import app modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.cli import EXIT_OK, main as cli_main

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)


def run_all(config_dir: str, out_dir: str, seeds: int = None, jobs: int = None) -> int:
    failures = 0
    for path in sorted(glob.glob(os.path.join(config_dir, "*.json"))):
        name = os.path.splitext(os.path.basename(path))[0]
        argv = ["run", "--config", path, "--out", os.path.join(out_dir, f"{name}.csv")]
        if seeds is not None:
            argv += ["--seeds", str(seeds)]
        if jobs is not None:
            argv += ["--jobs", str(jobs)]
        logger.info(f"Running {name}")
        code = cli_main(argv)
        if code != EXIT_OK:
            logger.error(f"{name} exited with code {code}")
            failures += 1
    return failures


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Reproduce every experiment config")
    parser.add_argument("--configs", default=os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs"))
    parser.add_argument("--out-dir", default="outputs")
    parser.add_argument("--seeds", type=int, help="Override the seed count of every config")
    parser.add_argument("--jobs", type=int)

    args = parser.parse_args()
    sys.exit(1 if run_all(args.configs, args.out_dir, args.seeds, args.jobs) else 0)
