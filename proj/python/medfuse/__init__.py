from ._medfuse import *  # noqa: F401,F403
