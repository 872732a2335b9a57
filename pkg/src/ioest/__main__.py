import sys

from ioest.cli import main

sys.exit(main())
