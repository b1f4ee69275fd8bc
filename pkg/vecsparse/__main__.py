"""Allow ``python -m vecsparse``."""

import sys

from vecsparse.cli import main

sys.exit(main())
