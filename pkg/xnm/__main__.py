import sys

from xnm.cli import main

sys.exit(main())
