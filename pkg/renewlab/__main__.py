import sys

from renewlab.main import main

sys.exit(main())
