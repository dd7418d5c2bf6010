"""Remote compute offload: a fixed-header TCP protocol, a task registry,
and deterministic data-parallel kernels (Bayer demosaicing, least-squares
polynomial fitting, device inventory)."""

from gpc.parexec import CHUNK, ExecPlan
from gpc.wire import HEADER_SIZE, Frame, TaskHeader

__all__ = ["CHUNK", "ExecPlan", "Frame", "HEADER_SIZE", "TaskHeader"]
__version__ = "0.1.0"
