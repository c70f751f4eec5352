"""Entry point: uv run run.py <command> ..."""

from __future__ import annotations

import sys
from pathlib import Path

# Ensure src/ is on the path for direct execution
sys.path.insert(0, str(Path(__file__).parent / "src"))

from dotenv import load_dotenv


def main(argv: list[str]) -> int:
    load_dotenv()

    from odx.cli import run

    return run(argv)


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
