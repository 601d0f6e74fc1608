"""Monte Carlo spot checks of every shipped configuration; exits 1 if any check fails."""
import sys
import time
from pathlib import Path

from thiele.cli import main as thiele

from surfaces import NAMES

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv):
    failed = []
    for name in argv or NAMES:
        t0 = time.perf_counter()
        print(f"== {name}")
        if thiele(["mc-check", "--config", str(CONFIGS / f"{name}.toml")]) != 0:
            failed.append(name)
        print(f"   {time.perf_counter() - t0:.1f}s")
    print("all passed" if not failed else f"failed: {', '.join(failed)}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
