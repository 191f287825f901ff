from ._lccdb import *  # noqa: F401,F403
