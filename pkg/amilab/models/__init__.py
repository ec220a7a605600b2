from .run import Run
from .run_event import RunEvent

__all__ = ["Run", "RunEvent"]
