"""
Version information for infostream.

This file is the single source of truth for the package version.
setup.py and the --version flag read it from here.
"""

# Version components
VERSION_MAJOR = 0
VERSION_MINOR = 4
VERSION_PATCH = 0

# Full version string
__version__ = f"{VERSION_MAJOR}.{VERSION_MINOR}.{VERSION_PATCH}"


def get_version() -> str:
    """Return the full version string."""
    return __version__


def get_version_tuple() -> tuple:
    """Return version as a tuple of integers."""
    return (VERSION_MAJOR, VERSION_MINOR, VERSION_PATCH)
