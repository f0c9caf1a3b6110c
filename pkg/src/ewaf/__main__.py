import sys

from ewaf.cli import main

sys.exit(main())
