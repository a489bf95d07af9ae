import os
import sys
import logging
from typing import Optional

import colorlog

from scripts.utils.settings_manager import settings_manager

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """
    Configura o logger raiz com saída colorida em stderr.

    Ordem de prioridade do nível: argumento, ASIAN_LOG_LEVEL, settings.yaml.
    stdout fica reservado para os dados emitidos pela CLI.
    """
    log_cfg = settings_manager.section("logging")
    level = (level or os.environ.get("ASIAN_LOG_LEVEL") or log_cfg.get("level", "INFO")).upper()

    handler = logging.StreamHandler(sys.stderr)
    if log_cfg.get("colored", True):
        handler.setFormatter(
            colorlog.ColoredFormatter(
                "%(log_color)s" + LOG_FORMAT,
                log_colors={
                    "DEBUG": "cyan",
                    "INFO": "green",
                    "WARNING": "yellow",
                    "ERROR": "red",
                    "CRITICAL": "red,bg_white",
                },
            )
        )
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger()
    # Evitar handlers duplicados quando run() é chamado várias vezes (testes)
    for existing in list(root.handlers):
        if getattr(existing, "_asian_handler", False):
            root.removeHandler(existing)
    handler._asian_handler = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, level, logging.INFO))
    return root
