"""Format and lint with ruff: ``modspace-format [paths...]``."""

import subprocess
import sys

from modspace.logging import get_logger

logger = get_logger(__name__)

DEFAULT_PATHS = ["src", "tests"]


def main() -> int:
    paths = sys.argv[1:] or DEFAULT_PATHS
    for step in (["ruff", "format"], ["ruff", "check", "--fix"]):
        try:
            subprocess.run(step + paths, check=True)
        except (subprocess.CalledProcessError, FileNotFoundError) as e:
            logger.error("ruff step failed", step=" ".join(step), error=str(e))
            return 1
    logger.info("format and lint complete", paths=paths)
    return 0


if __name__ == "__main__":
    sys.exit(main())
