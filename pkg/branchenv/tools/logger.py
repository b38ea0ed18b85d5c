import os
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from datetime import datetime
from rich.console import Console
from rich.markup import escape

# Shared handler settings; Logger.configure() may change them before first use
_state = {
    "log_dir": Path("logs").resolve(),
    "console_level": logging.WARNING,
    "log_filename": None,
}


def _prepare_log_file() -> Path:
    """
    Pick the absolute path of this process's log file and prune old runs.

    Returns:
        Path: The log file shared by every branchenv logger of the process.
    """
    logs_dir = _state["log_dir"]
    logs_dir.mkdir(parents=True, exist_ok=True)
    if _state["log_filename"] is None:
        # Keep the 5 most recent runs
        log_files = sorted(logs_dir.glob("branchenv_*.log"), key=os.path.getmtime)
        if len(log_files) >= 5:
            for old_file in log_files[: (len(log_files) - 4)]:
                old_file.unlink(missing_ok=True)

        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        _state["log_filename"] = logs_dir / f"branchenv_{timestamp}.log"

    _state["log_filename"].parent.mkdir(parents=True, exist_ok=True)
    return _state["log_filename"]


class Logger:
    """
    Named logger for branchenv modules.

    Handlers are attached on the first record, not at construction, so that
    importing the library writes nothing and the CLI can still choose the log
    directory. Records at INFO and above go to one rotating file per process;
    the stderr echo stays silent unless the CLI is run with --verbose.
    """

    def __init__(self, name=None):
        """
        Args:
            name: Logger name, usually the module path.
        """
        self._logger = logging.getLogger(name)
        self.console = Console()

    def _ensure_handlers(self):
        """Attach the file and stderr handlers if this logger has none yet."""
        if self._logger.handlers:
            return
        self._logger.setLevel(logging.DEBUG)
        self._logger.propagate = False

        console_handler = logging.StreamHandler()
        console_handler.setLevel(_state["console_level"])
        console_handler.setFormatter(logging.Formatter("%(levelname)s - %(message)s"))
        self._logger.addHandler(console_handler)

        try:
            file_handler = RotatingFileHandler(
                _prepare_log_file(),
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=5,
                delay=True,
            )
        except OSError:
            # An unwritable log directory leaves the stderr handler only
            return
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        )
        self._logger.addHandler(file_handler)

    @staticmethod
    def configure(log_dir=None, console_level=None):
        """
        Choose the log directory and the stderr threshold.

        The directory is resolved against the current working directory and only
        takes effect while no log file has been picked. The threshold is applied
        to existing branchenv loggers as well.

        Args:
            log_dir: Directory for log files.
            console_level: Minimum level echoed to standard error.
        """
        if log_dir is not None and _state["log_filename"] is None:
            _state["log_dir"] = Path(log_dir).resolve()
        if console_level is not None:
            _state["console_level"] = console_level
            for logger in logging.Logger.manager.loggerDict.values():
                if not isinstance(logger, logging.Logger):
                    continue
                if not logger.name.startswith("branchenv"):
                    continue
                for handler in logger.handlers:
                    if type(handler) is logging.StreamHandler:
                        handler.setLevel(console_level)

    def debug(self, message):
        self._ensure_handlers()
        self._logger.debug(message)

    def info(self, message):
        self._ensure_handlers()
        self._logger.info(message)

    def warning(self, message):
        self._ensure_handlers()
        self._logger.warning(message)

    def error(self, message):
        self._ensure_handlers()
        self._logger.error(message)

    def critical(self, message):
        self._ensure_handlers()
        self._logger.critical(message)

    def log(self, level, message):
        """Record a message at a numeric logging level."""
        self._ensure_handlers()
        self._logger.log(level, message)

    def log_and_print(self, message, level=logging.INFO):
        """
        Record a message and show it on the console.

        The console copy keeps rich markup; the recorded copy has it escaped.

        Args:
            message: Text, possibly with rich markup.
            level: Level of the recorded copy. Defaults to logging.INFO.
        """
        self._ensure_handlers()
        self._logger.log(level, escape(message))
        self.console.print(message)
