"""Allow ``python -m blockbp``."""
import sys

from blockbp.cli import main

sys.exit(main())
