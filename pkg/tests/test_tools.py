import json
import logging
import math
from unittest.mock import patch

import numpy as np
import pytest

from branchenv.tools.cli_tools import display_summary, format_value, print_diagnostic
from branchenv.tools.errors import ModelValidationError
from branchenv.tools import logger as logger_module
from branchenv.tools.logger import Logger
from branchenv.tools.reports import provenance, read_csv, to_jsonable, write_csv, write_json
from branchenv.tools.settings import Settings


@pytest.fixture
def meta():
    """
    Fixture to provide a provenance block.
    """
    return provenance("series", None, {"horizon": 8, "tol": np.float64(1e-12)})


def test_settings_from_file(tmp_path):
    """
    Test that a dotenv settings file overrides the defaults with typed values.
    """
    path = tmp_path / "branchenv.env"
    path.write_text("BRANCHENV_MASS_TOL=1e-8\nBRANCHENV_SUPPORT_CAP=5000\nBRANCHENV_LOG_DIR=runs\n")
    settings = Settings.from_file(path)
    assert settings.mass_tol == 1e-8
    assert settings.support_cap == 5000
    assert isinstance(settings.support_cap, int)
    assert settings.log_dir == "runs"
    assert settings.spectral_tol == Settings().spectral_tol


def test_settings_errors(tmp_path):
    """
    Test that missing files, unknown keys and malformed values are rejected.
    """
    with pytest.raises(ModelValidationError, match="not found"):
        Settings.from_file(tmp_path / "missing.env")

    path = tmp_path / "bad.env"
    path.write_text("BRANCHENV_COLOUR=red\n")
    with pytest.raises(ModelValidationError, match="unknown settings key"):
        Settings.from_file(path)

    path.write_text("BRANCHENV_MASS_TOL=small\n")
    with pytest.raises(ModelValidationError, match="not a float"):
        Settings.from_file(path)


def test_settings_overrides():
    """
    Test that None overrides leave the field unchanged.
    """
    settings = Settings().with_overrides(spectral_tol=1e-10, mass_tol=None)
    assert settings.spectral_tol == 1e-10
    assert settings.mass_tol == Settings().mass_tol
    assert settings.as_dict()["spectral_tol"] == 1e-10


def test_to_jsonable():
    """
    Test conversion of numpy values and non-finite floats.
    """
    value = {
        "array": np.array([1.0, np.inf]),
        "int": np.int64(3),
        "flag": np.bool_(True),
        "pair": (np.nan, -np.inf),
    }
    assert to_jsonable(value) == {
        "array": [1.0, "inf"],
        "int": 3,
        "flag": True,
        "pair": ["nan", "-inf"],
    }


def test_write_json_is_stable(tmp_path, meta):
    """
    Test that JSON reports carry provenance and are byte-stable.
    """
    payload = {"b": np.arange(3), "a": 0.1}
    first = write_json(tmp_path / "one" / "report.json", payload, meta)
    second = write_json(tmp_path / "two" / "report.json", payload, meta)
    assert first.read_bytes() == second.read_bytes()
    document = json.loads(first.read_text(encoding="utf-8"))
    assert document["provenance"]["tool"] == "branchenv"
    assert document["provenance"]["config"]["tol"] == 1e-12
    assert document["b"] == [0, 1, 2]


def test_write_csv(tmp_path, meta):
    """
    Test the provenance comments and exact float cells of CSV reports.
    """
    path = write_csv(tmp_path / "table.csv", ["n", "x", "alive"], [[0, 0.1, True], [1, math.pi, False]], meta)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# tool=branchenv"
    assert lines[3] == "# subcommand=series"
    header, rows = read_csv(path)
    assert header == ["n", "x", "alive"]
    assert rows == [["0", "0.1", "1"], ["1", repr(math.pi), "0"]]
    assert float(rows[1][1]) == math.pi


def test_format_value():
    """
    Test the summary table cell formatting.
    """
    assert format_value(True) == "yes"
    assert format_value(1 / 3) == "0.333333"
    assert format_value({"mode": "periodic", "period": 2}) == "mode=periodic, period=2"
    assert format_value(list(range(10))).endswith("... (10 values)]")


def test_display_summary(capsys):
    """
    Test that the summary table lists rows and written artifacts.
    """
    display_summary("Series of 'critical'", [("Xi_N", 32.0)], artifacts=["out/critical_series.csv"])
    output = capsys.readouterr().out
    assert "Series of 'critical'" in output
    assert "Xi_N" in output
    assert "wrote out/critical_series.csv" in output

    # Test that markup characters in a title are printed literally
    display_summary("Series of '[x]'", [("Xi_N", 1.0)])
    assert "Series of '[x]'" in capsys.readouterr().out


def test_print_diagnostic(capsys):
    """
    Test that diagnostics are single lines on standard error.
    """
    print_diagnostic("first\nsecond", prefix="input error")
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err.strip() == "branchenv: input error: first second"


def test_logger_methods():
    """
    Test that Logger forwards every level to the underlying logger.
    """
    logger = Logger("branchenv.test")
    with patch.object(logger, "_ensure_handlers"), patch.object(logger, "_logger") as mock_logger:
        logger.debug("d")
        logger.info("i")
        logger.warning("w")
        logger.error("e")
        logger.critical("c")
        logger.log(logging.INFO, "l")

    mock_logger.debug.assert_called_once_with("d")
    mock_logger.info.assert_called_once_with("i")
    mock_logger.warning.assert_called_once_with("w")
    mock_logger.error.assert_called_once_with("e")
    mock_logger.critical.assert_called_once_with("c")
    mock_logger.log.assert_called_once_with(logging.INFO, "l")


def test_log_and_print():
    """
    Test that log_and_print escapes markup for the log and prints the original.
    """
    logger = Logger("branchenv.test")
    with patch.object(logger, "_ensure_handlers"), patch.object(
        logger, "_logger"
    ) as mock_logger, patch.object(logger, "console") as mock_console:
        logger.log_and_print("[bold]done[/bold]")

    mock_logger.log.assert_called_once_with(logging.INFO, "\\[bold]done\\[/bold]")
    mock_console.print.assert_called_once_with("[bold]done[/bold]")


@pytest.fixture
def fresh_log_state(tmp_path):
    """
    Fixture to provide logger settings with no log file picked yet.
    """
    state = {"log_dir": tmp_path / "logs", "console_level": logging.WARNING, "log_filename": None}
    with patch.dict(logger_module._state, state):
        yield tmp_path


def _drop_handlers(name):
    for handler in list(logging.getLogger(name).handlers):
        handler.close()
        logging.getLogger(name).removeHandler(handler)


def test_logger_survives_directory_change(fresh_log_state, monkeypatch):
    """
    Test that loggers created after a change of working directory write to the configured directory.
    """
    monkeypatch.chdir(fresh_log_state)
    Logger.configure(log_dir="run_logs")
    first = Logger("branchenv.test.first")
    first.info("first record")

    elsewhere = fresh_log_state / "elsewhere"
    elsewhere.mkdir()
    monkeypatch.chdir(elsewhere)
    second = Logger("branchenv.test.second")
    second.info("second record")

    log_file = logger_module._state["log_filename"]
    assert log_file.is_absolute()
    assert log_file.parent == fresh_log_state / "run_logs"
    for name in ["branchenv.test.first", "branchenv.test.second"]:
        for handler in logging.getLogger(name).handlers:
            handler.flush()
    text = log_file.read_text(encoding="utf-8")
    assert "first record" in text
    assert "second record" in text
    assert not (elsewhere / "run_logs").exists()
    _drop_handlers("branchenv.test.first")
    _drop_handlers("branchenv.test.second")


def test_logger_recreates_missing_directory(fresh_log_state):
    """
    Test that a log directory removed after the file was picked is created again.
    """
    Logger("branchenv.test.picker").info("pick")
    _drop_handlers("branchenv.test.picker")
    log_dir = logger_module._state["log_filename"].parent
    for path in log_dir.iterdir():
        path.unlink()
    log_dir.rmdir()

    Logger("branchenv.test.late").info("late record")
    assert log_dir.is_dir()
    _drop_handlers("branchenv.test.late")


def test_logger_without_writable_directory(fresh_log_state):
    """
    Test that a log file that cannot be created leaves a working stderr logger.
    """
    with patch.object(logger_module, "_prepare_log_file", side_effect=OSError("read-only")):
        logger = Logger("branchenv.test.readonly")
        logger.error("still logged")
    handlers = logging.getLogger("branchenv.test.readonly").handlers
    assert [type(h) for h in handlers] == [logging.StreamHandler]
    _drop_handlers("branchenv.test.readonly")
