import logging
from typing import Any, Dict, Optional

from ..services.activity_service import ActivityService

logger = logging.getLogger("amilab.events")


def log_activity(
    events: Optional[ActivityService],
    event_type: str,
    description: str,
    metadata: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Utility function to log run events.

    Args:
        events: Event log of the current run; when None the event only goes to the logger
        event_type: Type of event (e.g., 'rollout', 'tao_update', 'dual_round')
        description: Description of the event
        metadata: Optional additional data about the event
    """
    logger.debug("%s: %s %s", event_type, description, metadata or {})
    if events is not None:
        events.log_activity(event_type=event_type, description=description, metadata=metadata)
