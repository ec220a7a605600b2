from pathlib import Path
from typing import Dict, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

from .config import get_settings

Base = declarative_base()

_factories: Dict[str, sessionmaker] = {}


def _create_engine(url: str) -> Engine:
    if url in ("sqlite://", "sqlite:///:memory:"):
        return create_engine(url, connect_args={"check_same_thread": False}, poolclass=StaticPool)
    if url.startswith("sqlite:///"):
        Path(url[len("sqlite:///"):]).parent.mkdir(parents=True, exist_ok=True)
    return create_engine(url)


def session_factory(url: Optional[str] = None) -> sessionmaker:
    """One engine and session factory per registry URL; tables are created on first use."""
    url = url or get_settings().database_url
    if url not in _factories:
        from . import models  # noqa: F401  registers the tables on Base.metadata

        engine = _create_engine(url)
        Base.metadata.create_all(engine)
        _factories[url] = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    return _factories[url]

