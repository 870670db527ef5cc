import sys

from corrsched.cli import main

sys.exit(main())
