import json
import logging
import sys

from ..config import Settings


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        extra = getattr(record, "metadata", None)
        if extra:
            payload["metadata"] = extra
        return json.dumps(payload, sort_keys=True, default=str)


def configure_logging(settings: Settings) -> None:
    """Install a single stderr handler on the package logger."""
    logger = logging.getLogger("amilab")
    logger.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    if settings.log_json:
        handler.setFormatter(JsonFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(settings.log_level.upper())
    logger.propagate = False
