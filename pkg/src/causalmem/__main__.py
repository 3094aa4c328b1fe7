import sys

from causalmem.cli import main

sys.exit(main())
