"""
Tests sqrt_gaps.__init__ utils
"""

import logging

from sqrt_gaps import (CheckFailed, ConfigError, DuplicateFilter,
                       NumericsError, numerics_logger, strex)


def test_strex():
    try:
        raise RuntimeError('Boo!')
    except RuntimeError as ex:
        msg = strex(ex)
        assert msg == 'RuntimeError(Boo!)'

        msg = strex(ex, tb=True)
        assert msg.startswith('RuntimeError(Boo!)\n\n')
        assert 'Traceback (most recent call last):' in msg


def test_numerics_logger():
    assert numerics_logger('sqrt_gaps.seq').name == 'sqrt_gaps.seq'

    long_name = 'sqrt_gaps.some.deeply.nested.module.name'
    logger = numerics_logger(long_name)
    assert logger.name == '...' + long_name[-27:]
    assert len(logger.name) == 30

    deduped = numerics_logger('sqrt_gaps.dedupe_test', dedupe=True)
    assert any(isinstance(f, DuplicateFilter) for f in deduped.filters)


def test_duplicate_filter():
    dedupe = DuplicateFilter()

    def record(msg):
        return logging.LogRecord('name', logging.INFO, 'module.py', 1, msg, None, None)

    assert dedupe.filter(record('a'))
    assert not dedupe.filter(record('a'))
    assert not dedupe.filter(record('a'))
    assert dedupe.suppressed == 2

    rec = record('b')
    assert dedupe.filter(rec)
    assert rec.msg == 'b [2 repeats suppressed]'
    assert dedupe.suppressed == 0
    assert dedupe.filter(record('a'))


def test_errors():
    assert issubclass(ConfigError, NumericsError)
    ex = CheckFailed('out of tolerance', {'max_deviation': 1.0})
    assert isinstance(ex, NumericsError)
    assert ex.report == {'max_deviation': 1.0}
    assert CheckFailed('no report').report is None
