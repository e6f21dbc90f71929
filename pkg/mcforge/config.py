import logging
from typing import List

import structlog
import structlog.processors

from .errors import ErrorParameter
from .experiments import ExperimentSpec
from .logutil import renderers

logger: structlog.BoundLogger = structlog.getLogger()


def log_levels() -> List[str]:
    """return a list of supported log levels"""
    return [l.lower() for l in logging._nameToLevel.keys()]


def configure_logging(log_level: str, force_colors: bool = False) -> None:
    """configure logging globally"""
    level_type = logging._nameToLevel.get(log_level.upper(), None)
    if level_type is None:
        raise ErrorParameter("invalid log level type: {}".format(log_level))

    logging.basicConfig(level=level_type)
    logging.getLogger().setLevel(level_type)

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            renderers.ColorKeyValueRenderer(force_colors=force_colors),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


class Config(object):
    """options of the mcforge command group, handed to every sub-command"""

    DEFAULT_LOG_LEVEL = "info"
    DEFAULT_WORKERS = 1

    def experiment_spec(self, name: str, **overrides) -> ExperimentSpec:
        """an ExperimentSpec carrying the group-wide settings"""
        spec = ExperimentSpec(name=name, workers=self.workers, **overrides)
        self.logger.bind(experiment=name).debug("Built experiment spec")
        return spec

    def __init__(
        self,
        log_level: str = DEFAULT_LOG_LEVEL,
        workers: int = DEFAULT_WORKERS,
        force_colors: bool = False,
    ):
        """
        object initialization
        :param log_level: name of the logging level in use
        :param workers: threads used for replicated experiments
        :param force_colors: keep ANSI colours when stderr is not a terminal
        """
        if workers < 1:
            raise ErrorParameter("workers must be at least 1, got {}".format(workers))
        self.logger = logger.bind(workers=workers)
        self.log_level = log_level
        self.workers = workers
        self.force_colors = force_colors
