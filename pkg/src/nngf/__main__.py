import sys

from nngf.cli import main

sys.exit(main())
