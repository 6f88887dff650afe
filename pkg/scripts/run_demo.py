#!/usr/bin/env python3
"""Run the oracle policy over every fixture dataset under both planners and
print the accuracy/token summary for each."""

import pathlib
import sys
import tempfile

from planhorizon import cli

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def main() -> int:
    configs = ["run_kopl_oracle.json", "run_atomic_oracle.json", "run_mock_noisy.json"]
    with tempfile.TemporaryDirectory() as tmp:
        for name in configs:
            out = pathlib.Path(tmp) / name.removesuffix(".json")
            print(f"== {name} ==")
            code = cli.main(["run", "--config", str(FIXTURES / name), "--out", str(out)])
            if code != 0:
                return code
            print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
