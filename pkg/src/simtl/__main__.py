import sys

from simtl.cli import main

sys.exit(main())
