import sys

from skdelay.cli import main

sys.exit(main())
