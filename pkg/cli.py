"""
Command-line entry point for emrseg.

Usage:
    python cli.py [--config FILE] [--seed N] COMMAND ...
"""

import sys

from emrseg.commands import main

if __name__ == '__main__':
    sys.exit(main())
