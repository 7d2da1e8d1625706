import sys

from bnm.cli import main

sys.exit(main())
