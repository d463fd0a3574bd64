import logging
import sys

logger = logging.getLogger('pnetdesign')


def add_stdout_handler(level: int = logging.INFO) -> logging.Handler:
    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)-5.5s [%(module)s] %(message)s', '%H:%M:%S'))
    logger.addHandler(handler)
    logger.setLevel(level)
    return handler
