import sys

from backend.main import main

sys.exit(main())
