import sys

from clustersim.main import main

sys.exit(main())
