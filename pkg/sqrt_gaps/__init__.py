import logging
import traceback


class DuplicateFilter(logging.Filter):
    """
    Blocks consecutive repeats of a log message.
    Sweeps call the same routines thousands of times.
    The number of blocked repeats is appended to the next message that passes.
    """

    def __init__(self, name: str = ''):
        super().__init__(name)
        self.last_log = None
        self.suppressed = 0

    def filter(self, record):
        current_log = (record.name, record.levelno, record.msg)
        if current_log == self.last_log:
            self.suppressed += 1
            return False
        if self.suppressed:
            record.msg = f'{record.msg} [{self.suppressed} repeats suppressed]'
            self.suppressed = 0
        self.last_log = current_log
        return True


def numerics_logger(name: str, dedupe=False):
    """
    Convenience function for creating a module-specific logger.
    """
    logger = logging.getLogger('...'+name[-27:] if len(name) > 30 else name)
    if dedupe:
        logger.addFilter(DuplicateFilter())
    return logger


def strex(ex: Exception, tb=False):
    """
    Generic formatter for exceptions.
    A formatted traceback is included if `tb=True`.
    """
    msg = f'{type(ex).__name__}({str(ex)})'
    if tb:
        trace = ''.join(traceback.format_exception(None, ex, ex.__traceback__))
        return f'{msg}\n\n{trace}'
    else:
        return msg


class NumericsError(Exception):
    """
    Base class for all errors raised by sqrt_gaps.
    """


class ConfigError(NumericsError):
    """
    A parameter is missing or out of range.
    """


class CheckFailed(NumericsError):
    """
    A check command measured a value outside its configured tolerance.
    The report that failed is kept in `report`.
    """

    def __init__(self, msg: str, report=None):
        super().__init__(msg)
        self.report = report
