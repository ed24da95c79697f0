import pytest

from ringwatch.config import LoggingConfig
from ringwatch.utils import LoggingError, log


@pytest.fixture
def log_file(tmp_path):
    log.setup(LoggingConfig(file="run.log", level="DEBUG"), tmp_path)
    yield tmp_path / "run.log"
    log.bind_clock(None)
    log.teardown()


def test_file_lines_carry_simulated_time(log_file):
    log.info("before clock")
    log.bind_clock(lambda: 1500)
    log.warning("at clock")
    lines = log_file.read_text(encoding="utf-8").splitlines()
    assert "[t=-] before clock" in lines[0]
    assert "[t=1.500s] at clock" in lines[1]


def test_setup_replaces_handlers(log_file, tmp_path):
    log.setup(LoggingConfig(file=None), tmp_path / "other")
    log.info("console only")
    assert not (tmp_path / "other").exists()


def test_invalid_level():
    with pytest.raises(LoggingError):
        log.set_level("LOUD")
