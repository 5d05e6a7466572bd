"""Replica-chunk execution.

Replicas are cut into fixed-size chunks; chunk ``i`` always draws from
``stream.chunk(i)``.  Results come back in chunk order, so any reduction
done by the caller is independent of how many worker processes ran them.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from .rng import RandomStream

DEFAULT_CHUNK = 1 << 15

__all__ = ["DEFAULT_CHUNK", "chunk_sizes", "run_chunks", "default_workers", "set_default_workers"]

_default_workers = 1


def set_default_workers(workers: int) -> None:
    """Set the worker count used when callers pass ``workers=None``."""
    global _default_workers
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _default_workers = int(workers)


def default_workers() -> int:
    return _default_workers


def chunk_sizes(replicas: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    full, rest = divmod(int(replicas), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def _call(kernel, stream, size, args):
    return kernel(stream.generator(), size, *args)


def run_chunks(
    kernel: Callable[..., Any],
    stream: RandomStream,
    replicas: int,
    args: Sequence[Any] = (),
    chunk: int = DEFAULT_CHUNK,
    workers: int | None = None,
) -> list[Any]:
    """Run ``kernel(generator, size, *args)`` once per replica chunk.

    The kernel must be a module-level function (it may be pickled).
    """
    sizes = chunk_sizes(replicas, chunk)
    streams = [stream.chunk(i) for i in range(len(sizes))]
    workers = _default_workers if workers is None else workers
    workers = max(1, min(int(workers), len(sizes), os.cpu_count() or 1)) if workers > 1 else 1
    if workers == 1:
        return [_call(kernel, s, n, args) for s, n in zip(streams, sizes)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_call, kernel, s, n, args) for s, n in zip(streams, sizes)]
        return [f.result() for f in futures]
