import sys

from mvbayes.cli import main

sys.exit(main())
