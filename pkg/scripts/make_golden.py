"""Regenerate the pipeline fixture log and the golden outputs.

Run from the repository root:  python scripts/make_golden.py
Only rerun this after an intentional change to pipeline output.
"""

import shutil
import sys
from pathlib import Path

from logsentinel import dataset as D
from logsentinel.cli import main

ROOT = Path(__file__).resolve().parent.parent
FIXTURE = ROOT / "tests" / "fixtures" / "pipeline"
GOLDEN = ROOT / "tests" / "golden" / "pipeline"

NOISE = [
    '{"t":{"$date":"2024-05-01T11:59:58.001+00:00"},"s":"I","c":"NETWORK","id":22943,'
    '"ctx":"listener","msg":"Connection accepted","attr":{"remote":"127.0.0.1:41432",'
    '"connectionCount":1}}',
    '{"t":{"$date":"2024-05-01T11:59:59.',
]


def main_():
    lines = NOISE + D.synth_logs(D.bundled_queries(), 1)
    D.write_lines(lines, FIXTURE / "mongod.log")
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    code = main(["pipeline", "--config", str(FIXTURE / "run.json"), "--out-dir", str(GOLDEN)])
    sys.exit(code)


if __name__ == "__main__":
    main_()
