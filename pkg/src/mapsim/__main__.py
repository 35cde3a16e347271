"""Module entry point: python -m mapsim <command> ..."""

from .cli_io import main

if __name__ == "__main__":
    raise SystemExit(main())
