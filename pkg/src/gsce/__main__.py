import sys

from gsce.cli import main

sys.exit(main())
