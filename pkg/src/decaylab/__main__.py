import sys

from decaylab.lab import main

sys.exit(main())
