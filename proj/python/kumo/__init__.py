# SPDX-License-Identifier: Apache-2.0
"""Python access to the kumo benchmark core."""

from ._kumo import *  # noqa: F401,F403
from ._kumo import KumoError

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
