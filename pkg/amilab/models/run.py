from datetime import datetime

from sqlalchemy import Column, DateTime, Integer, String
from sqlalchemy.orm import relationship

from amilab.database import Base


class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, unique=True, nullable=False, index=True)
    kind = Column(String, nullable=False)  # e.g., 'train-victims', 'attack', 'defend'
    label = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    out_dir = Column(String, nullable=False)
    manifest_path = Column(String, nullable=True)
    status = Column(String, default="running")
    created_at = Column(DateTime, default=datetime.utcnow)
    ended_at = Column(DateTime, nullable=True)

    events = relationship("RunEvent", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<Run(run_id={self.run_id}, kind={self.kind}, label={self.label}, seed={self.seed})>"
