import sys

from sqrt_gaps.cli import main

sys.exit(main())
