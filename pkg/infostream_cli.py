"""
infostream - command-line harness

Entry point shim. All application code lives in the infostream/ package.
"""
import sys

from infostream.cli import main

if __name__ == "__main__":
    sys.exit(main())
