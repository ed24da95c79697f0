import pytest

from ringwatch.config import ErrorConfig
from ringwatch.core import ErrorCategory, ErrorHandler, ErrorSeverity
from ringwatch.utils import ConfigError, ConfigMismatchError, LookupFailure, PresimError, ScheduleError


@pytest.fixture
def handler() -> ErrorHandler:
    return ErrorHandler(ErrorConfig(exit_on_fatal=False, max_history=3))


@pytest.mark.parametrize(
    "error, category, severity, code",
    [
        (ConfigError("bad key"), ErrorCategory.CONFIG, ErrorSeverity.FATAL, 2),
        (PresimError("stale tables"), ErrorCategory.ANALYSIS, ErrorSeverity.ERROR, 1),
        (LookupFailure("no route"), ErrorCategory.PROTOCOL, ErrorSeverity.WARNING, 1),
        (ScheduleError("past"), ErrorCategory.SIMULATION, ErrorSeverity.ERROR, 1),
        (ConfigMismatchError("differs"), ErrorCategory.ARTIFACT, ErrorSeverity.ERROR, 1),
        (ValueError("boom"), ErrorCategory.UNKNOWN, ErrorSeverity.FATAL, 1),
    ],
)
def test_classification(handler, error, category, severity, code):
    context = handler.handle_error(error, source="test")
    assert context.category is category
    assert context.severity is severity
    assert context.exit_code == code


def test_fatal_errors_exit_with_category_code():
    handler = ErrorHandler(ErrorConfig(exit_on_fatal=True))
    with pytest.raises(SystemExit) as exc:
        handler.handle_error(ConfigError("bad key"))
    assert exc.value.code == 2


def test_history_is_bounded_and_filterable(handler):
    for k in range(5):
        handler.handle_error(PresimError(f"e{k}"))
    handler.handle_error(LookupFailure("w"))
    history = handler.get_error_history()
    assert len(history) == 3
    assert [c.message for c in handler.get_error_history(category=ErrorCategory.ANALYSIS)] == ["e3", "e4"]
    assert len(handler.get_error_history(severity=ErrorSeverity.WARNING, limit=1)) == 1
    handler.clear_history()
    assert handler.get_error_history() == []


def test_registered_handlers_run_and_failures_are_contained(handler):
    seen = []
    handler.register_handler(ErrorCategory.ANALYSIS, lambda ctx: seen.append(ctx.message))
    handler.register_handler(ErrorCategory.ANALYSIS, lambda ctx: 1 / 0)
    handler.handle_error(PresimError("x", details={"path": "p"}))
    assert seen == ["x"]
    assert handler.get_error_history()[-1].details == "{'path': 'p'}"
