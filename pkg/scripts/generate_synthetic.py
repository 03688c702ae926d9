"""
Write the synthetic flow dataset used in place of gauge data.

Usage:
    uv run python scripts/generate_synthetic.py [data/synthetic_flows.csv]
"""

import sys
from pathlib import Path

from app.v1.core.config import get_settings
from app.v1.core.logging import configure_logging
from app.v1.services.backtest import cmd_synthesize


def main() -> None:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/synthetic_flows.csv")
    settings = get_settings()
    configure_logging(settings.LOG_LEVEL, settings.LOG_JSON)
    cmd_synthesize(settings, target)


if __name__ == "__main__":
    main()
