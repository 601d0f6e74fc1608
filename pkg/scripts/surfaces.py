"""Solve every shipped configuration and write its reserve surface CSVs."""
import sys
from pathlib import Path

from thiele.cli import main as thiele

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
NAMES = ["endowment", "pension", "binary_endowment", "rate_cap", "rate_floor", "caplet", "floorlet",
         "reinsurance"]


def main(argv):
    names = argv or NAMES
    status = 0
    for name in names:
        print(f"== {name}")
        status = max(status, thiele(["surface", "--config", str(CONFIGS / f"{name}.toml")]))
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
