"""Busbar-splitting grid control workbench."""

from ._topogrid import *  # noqa: F401,F403
from ._topogrid import __version__  # noqa: F401
