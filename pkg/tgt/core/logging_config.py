"""
Logging configuration with structured logging and proper formatting.
"""
import logging
import logging.config
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import structlog

from tgt.core.config import LoggingSettings, get_settings

_SHARED_PROCESSORS = [
    structlog.stdlib.add_logger_name,
    structlog.stdlib.add_log_level,
    structlog.stdlib.PositionalArgumentsFormatter(),
    structlog.processors.TimeStamper(fmt="iso"),
    structlog.processors.StackInfoRenderer(),
    structlog.processors.format_exc_info,
    structlog.processors.UnicodeDecoder(),
]


def setup_logging(settings: Optional[LoggingSettings] = None) -> None:
    """Setup structured logging configuration"""
    settings = settings or get_settings().logging
    renderer = (
        structlog.processors.JSONRenderer()
        if settings.format == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            *_SHARED_PROCESSORS,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    log_config: Dict[str, Any] = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "structured": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processor": renderer,
                "foreign_pre_chain": _SHARED_PROCESSORS,
            },
        },
        "handlers": {
            # stdout stays free for command output
            "console": {
                "class": "logging.StreamHandler",
                "level": settings.level,
                "formatter": "structured",
                "stream": sys.stderr,
            },
        },
        "loggers": {
            "tgt": {
                "handlers": ["console"],
                "level": settings.level,
                "propagate": False,
            },
        },
        "root": {
            "level": "WARNING",
            "handlers": ["console"],
        },
    }

    if settings.file_path:
        log_file = Path(settings.file_path)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        log_config["handlers"]["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": settings.level,
            "formatter": "structured",
            "filename": str(log_file),
            "maxBytes": settings.max_file_size_mb * 1024 * 1024,
            "backupCount": settings.backup_count,
            "encoding": "utf-8",
        }
        log_config["loggers"]["tgt"]["handlers"].append("file")
        log_config["root"]["handlers"].append("file")

    logging.config.dictConfig(log_config)


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a structured logger with the given name"""
    return structlog.get_logger(name)
