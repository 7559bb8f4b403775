import os
from logging import config as logging_config

import yaml


def setup_logging(logging_config_path: str, level: str | None = None) -> None:
    with open(logging_config_path, "r") as stream:
        logging_config_yaml = yaml.load(stream, Loader=yaml.FullLoader)

    # RotatingFileHandler refuses to start when its directory is missing
    for handler in logging_config_yaml.get("handlers", {}).values():
        filename = handler.get("filename")
        if filename:
            os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)

    if level:
        logging_config_yaml.setdefault("loggers", {}).setdefault("root", {})["level"] = level.upper()

    logging_config.dictConfig(logging_config_yaml)
