import sys

from hdram.cli import main

sys.exit(main())
