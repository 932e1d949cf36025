import sys

from avowable.cli import main

sys.exit(main())
