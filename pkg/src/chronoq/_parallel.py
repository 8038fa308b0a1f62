"""Deterministic chunked evaluation.

Chunk boundaries depend only on the problem size, never on the worker count,
and reductions combine chunk results in a fixed pairwise tree. Results are
therefore bit-identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

CHUNK = 256


def chunk_slices(n: int, chunk: int = CHUNK) -> list[slice]:
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]


def chunked_map(fn, n: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """Apply ``fn(slice)`` to every chunk of ``range(n)``, results in chunk order."""
    slices = chunk_slices(n, chunk)
    if workers is None or workers <= 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


def tree_sum(parts: list):
    """Pairwise reduction in a fixed order."""
    if not parts:
        raise ValueError("nothing to sum")
    parts = list(parts)
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]
