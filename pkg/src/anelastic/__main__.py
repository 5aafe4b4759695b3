"""Allow running the command-line driver as python -m anelastic."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
