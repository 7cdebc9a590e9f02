import sys

from posecap.cli import main

sys.exit(main())
