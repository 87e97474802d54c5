import sys

from semaff.cli import main

sys.exit(main())
