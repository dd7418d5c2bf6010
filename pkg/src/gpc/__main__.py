import sys

from gpc.cli import main

sys.exit(main())
