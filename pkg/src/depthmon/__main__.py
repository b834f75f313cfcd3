import sys

from depthmon.cli import main

sys.exit(main())
