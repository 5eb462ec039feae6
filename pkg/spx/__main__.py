"""Allow running spx as a module: python -m spx"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
