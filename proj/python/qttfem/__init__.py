from ._qttfem import *  # noqa: F401,F403
from ._qttfem import __doc__  # noqa: F401
