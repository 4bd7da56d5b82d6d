import sys

from shapekit.cli import main

sys.exit(main())
