"""Module entry point for `python -m specdetect`.

This dispatches to the CLI.
"""
from specdetect.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
