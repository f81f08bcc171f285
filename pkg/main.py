import sys

from modspace.cli import main

if __name__ == "__main__":
    sys.exit(main())
