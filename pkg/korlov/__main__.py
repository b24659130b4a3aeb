# korlov/__main__.py

import sys

from korlov.main import main

sys.exit(main())
