"""Allow running as ``python -m shapeci``."""

import sys

from shapeci.cli import main

if __name__ == "__main__":
    sys.exit(main())
