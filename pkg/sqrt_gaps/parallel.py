"""
Deterministic parallel evaluation.

Work lists are split into contiguous chunks whose boundaries depend only on the
list and the chunk size, never on the worker count. Results come back in input
order, and reductions use `math.fsum`, so outputs are bit-identical for any
number of threads.
"""

import math
from typing import Any, Callable, Iterable, Literal, Optional, Sequence

from joblib import Parallel, delayed, effective_n_jobs

from sqrt_gaps import numerics_logger

DEFAULT_CHUNK_SIZE = 64

Preference = Literal['threads', 'processes']

LOGGER = numerics_logger(__name__)


def _run_chunk(func: Callable, chunk: Sequence) -> list:
    return [func(item) for item in chunk]


class ChunkRunner:

    def __init__(self,
                 threads: Optional[int] = None,
                 prefer: Preference = 'threads',
                 ):
        self.threads = threads or effective_n_jobs(-1)
        self.prefer = prefer

    @staticmethod
    def split(items: Sequence, chunk_size: int) -> list[Sequence]:
        if chunk_size < 1:
            raise ValueError(f'chunk size must be positive, got {chunk_size}')
        return [items[i:i + chunk_size] for i in range(0, len(items), chunk_size)]

    def map(self,
            func: Callable,
            items: Sequence,
            chunk_size: int = DEFAULT_CHUNK_SIZE,
            ) -> list:
        chunks = self.split(items, chunk_size)
        jobs = min(self.threads, len(chunks))

        if jobs <= 1:
            results = [_run_chunk(func, c) for c in chunks]
        else:
            LOGGER.debug(f'{len(items)} items in {len(chunks)} chunks on {jobs} {self.prefer}')
            results = Parallel(n_jobs=jobs, prefer=self.prefer)(
                delayed(_run_chunk)(func, c) for c in chunks)

        return [v for chunk in results for v in chunk]


def chunked_map(func: Callable,
                items: Sequence,
                threads: Optional[int] = None,
                chunk_size: int = DEFAULT_CHUNK_SIZE,
                prefer: Preference = 'threads',
                ) -> list:
    """
    Applies `func` to every item, in parallel, returning results in input order.

    Shortcut for `ChunkRunner(threads, prefer).map(func, items, chunk_size)`.

    Args:
        func (Callable):
            Called once per item. Must not depend on shared mutable state.

        items (Sequence):
            The ordered work list.

        threads (int, optional):
            Worker count. Defaults to the number of available cores.
            Has no effect on the result.

        chunk_size (int, optional):
            Number of consecutive items evaluated by one job.

        prefer (str, optional):
            'threads' for numpy-heavy work that releases the GIL,
            'processes' for pure Python loops.

    Returns:
        list: `[func(item) for item in items]`

    Example:

        from sqrt_gaps import parallel

        squares = parallel.chunked_map(lambda x: x * x, range(1000), threads=4)
        total = parallel.ordered_sum(squares)
    """
    return ChunkRunner(threads, prefer).map(func, items, chunk_size)


def ordered_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum; independent of summation order."""
    return math.fsum(values)


def ordered_complex_sum(values: Iterable[Any]) -> complex:
    values = [complex(v) for v in values]
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))
