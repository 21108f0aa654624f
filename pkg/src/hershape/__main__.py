import sys

from hershape.cli import main

sys.exit(main())
