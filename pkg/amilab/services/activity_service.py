import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from sqlalchemy.orm import Session

from ..exceptions import IntegrityError
from ..models.run_event import RunEvent

logger = logging.getLogger(__name__)


@dataclass
class EventEntry:
    sequence: int
    event_type: str
    description: str
    metadata: Dict[str, Any] = field(default_factory=dict)


class ActivityService:
    """Ordered event log of one run, kept in memory and mirrored to the registry when a session is given."""

    def __init__(self, run_id: str, db: Optional[Session] = None):
        self.run_id = run_id
        self.db = db
        self.events: List[EventEntry] = []

    def log_activity(
        self,
        event_type: str,
        description: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> EventEntry:
        """
        Record one run event.

        Args:
            event_type: Type of event (e.g., 'rollout', 'opp_fit', 'adversary_update')
            description: Optional human-readable description
            metadata: Optional JSON-serialisable details (iteration, losses, counts)
        """
        entry = EventEntry(len(self.events), event_type, description or event_type, dict(metadata or {}))
        self.events.append(entry)
        if self.db is not None:
            self.db.add(
                RunEvent(
                    run_id=self.run_id,
                    sequence=entry.sequence,
                    event_type=event_type,
                    description=entry.description,
                    event_metadata=entry.metadata,
                )
            )
            self.db.commit()
        return entry

    def of_type(self, event_type: str) -> List[EventEntry]:
        return [e for e in self.events if e.event_type == event_type]

    def assert_order(self, expected: Sequence[str], group_key: str = "iteration") -> None:
        """Within every group of events sharing `metadata[group_key]`, the expected types occur in order."""
        groups: Dict[Any, List[str]] = {}
        for e in self.events:
            if group_key in e.metadata and e.event_type in expected:
                groups.setdefault(e.metadata[group_key], []).append(e.event_type)
        for key, types in groups.items():
            positions = [types.index(t) for t in expected if t in types]
            missing = [t for t in expected if t not in types]
            if missing or positions != sorted(positions):
                raise IntegrityError(
                    f"Event order violated in {group_key}={key}: saw {types}, expected {list(expected)}"
                )

    def get_run_events(self, event_type: Optional[str] = None, limit: int = 1000) -> List[RunEvent]:
        """Persisted events for this run, oldest first."""
        if self.db is None:
            return []
        query = self.db.query(RunEvent).filter(RunEvent.run_id == self.run_id)
        if event_type:
            query = query.filter(RunEvent.event_type == event_type)
        return query.order_by(RunEvent.sequence.asc()).limit(limit).all()
