"""
nsklimit: Navier-Stokes-Korteweg runs and their vanishing viscosity-capillarity limit
"""
__version__ = "0.1.0"

import sys

from .cli import cli_main


def main():
    """Main entry point for the package."""
    sys.exit(cli_main())


__all__ = ["main", "cli_main", "__version__"]
