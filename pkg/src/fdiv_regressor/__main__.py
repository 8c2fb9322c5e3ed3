"""Allow ``python -m fdiv_regressor``."""

import sys

from .main import main

sys.exit(main())
