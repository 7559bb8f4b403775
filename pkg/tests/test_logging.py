import logging

import pytest
import yaml

from logs.logger_conf import setup_logging


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            handler.close()
            root.removeHandler(handler)
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


def test_creates_log_directory_and_applies_level(tmp_path, restore_root_logger):
    log_file = tmp_path / "nested" / "file" / "all.log"
    config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {"default": {"format": "%(levelname)s | %(message)s"}},
        "handlers": {
            "file": {
                "class": "logging.handlers.RotatingFileHandler",
                "formatter": "default",
                "filename": str(log_file),
                "maxBytes": 1024,
                "backupCount": 1,
            }
        },
        "loggers": {"root": {"level": "INFO", "handlers": ["file"]}},
    }
    path = tmp_path / "logger.yml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")

    setup_logging(str(path), level="debug")
    logging.getLogger("src.app.tests").debug("episode detail")
    for handler in logging.getLogger().handlers:
        handler.flush()

    assert log_file.parent.is_dir()
    assert "DEBUG | episode detail" in log_file.read_text(encoding="utf-8")
