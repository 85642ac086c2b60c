import sys

from potdiag.cli import main

sys.exit(main())
