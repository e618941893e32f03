# -*- coding: utf-8 -*-

"""Top-level package for compiled_games."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("compiled-games")
except PackageNotFoundError:
    __version__ = "uninstalled"

__author__ = "Compiled Games Contributors"
__email__ = ""
