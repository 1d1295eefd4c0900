"""
Entry point for running the package as a module.

Example: python -m sparsepr sweep --preset smoke
"""

import sys

from sparsepr.main import main

if __name__ == "__main__":
    sys.exit(main())
