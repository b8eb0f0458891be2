"""
Parallel sweep execution.

Trials run in a process pool driven from an asyncio loop; a single writer
emits CSV rows in (cell, trial) order whatever order the trials finish in.
"""
import asyncio
import csv
import functools
import io
import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import aiofiles
import psutil

from infostream.harness import SweepJob, SweepSpec, run_job

logger = logging.getLogger(__name__)

T = TypeVar("T")


async def _run_blocking(executor: Optional[Executor], func: Callable[..., T], *args: Any, **kwargs: Any) -> T:
    """Runs a blocking function in ``executor`` (the loop's default when None)."""
    loop = asyncio.get_running_loop()
    pfunc = functools.partial(func, *args, **kwargs)
    return await loop.run_in_executor(executor, pfunc)


def default_workers(config: Optional[Dict[str, Any]] = None) -> int:
    """Configured worker count, or one per physical core when unset."""
    configured = int(((config or {}).get("harness") or {}).get("workers", 0) or 0)
    if configured > 0:
        return configured
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def format_row(columns: Sequence[str], row: Dict[str, Any]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerow([row.get(c, "") for c in columns])
    return buffer.getvalue()


class OrderedCsvSink:
    """Buffers out-of-order rows and writes them by job index.

    Without a path, rows are kept in memory and returned by ``text()``.
    """

    def __init__(self, path: Optional[Path], columns: Sequence[str]):
        self.path = Path(path).expanduser() if path is not None else None
        self.columns = list(columns)
        self.rows: List[Dict[str, Any]] = []
        self._pending: Dict[int, Dict[str, Any]] = {}
        self._next = 0
        self._file = None
        self._lines: List[str] = []

    async def open(self):
        header = format_row(self.columns, {c: c for c in self.columns})
        if self.path is None:
            self._lines.append(header)
            return
        await _run_blocking(None, self.path.parent.mkdir, parents=True, exist_ok=True)
        self._file = await aiofiles.open(self.path, "w", encoding="utf-8")
        await self._file.write(header)

    async def put(self, index: int, row: Dict[str, Any]):
        self._pending[index] = row
        while self._next in self._pending:
            ready = self._pending.pop(self._next)
            line = format_row(self.columns, ready)
            if self._file is not None:
                await self._file.write(line)
            else:
                self._lines.append(line)
            self.rows.append(ready)
            self._next += 1

    async def close(self):
        if self._pending:
            logger.warning(f"Sweep: {len(self._pending)} rows never became writable "
                           f"(missing index {self._next})")
        if self._file is not None:
            await self._file.close()
            self._file = None
            logger.info(f"Sweep: wrote {len(self.rows)} rows to {self.path}")

    def text(self) -> str:
        return "".join(self._lines)


async def _indexed(executor: Executor, job: SweepJob):
    return job.index, await _run_blocking(executor, run_job, job)


async def run_jobs(jobs: List[SweepJob], sink: OrderedCsvSink, workers: int):
    if workers <= 1:
        for job in jobs:
            await sink.put(job.index, run_job(job))
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        pending = [asyncio.ensure_future(_indexed(pool, job)) for job in jobs]
        try:
            for finished in asyncio.as_completed(pending):
                index, row = await finished
                await sink.put(index, row)
        except BaseException:
            for future in pending:
                future.cancel()
            raise


async def run_sweep_async(spec: SweepSpec, config: Optional[Dict[str, Any]] = None,
                          workers: Optional[int] = None, out: Optional[Path] = None) -> OrderedCsvSink:
    jobs = spec.jobs(config)
    workers = min(workers or default_workers(config), max(len(jobs), 1))
    logger.info(f"Sweep: {spec.algo}, {len(jobs)} trials over {len(spec.cells())} cells, "
                f"{workers} worker(s)")
    sink = OrderedCsvSink(out, spec.columns())
    await sink.open()
    try:
        await run_jobs(jobs, sink, workers)
    finally:
        await sink.close()
    return sink


def run_sweep(spec: SweepSpec, config: Optional[Dict[str, Any]] = None,
              workers: Optional[int] = None, out: Optional[Path] = None) -> OrderedCsvSink:
    """Run every (cell, trial) of ``spec``; rows are identical for any
    worker count."""
    return asyncio.run(run_sweep_async(spec, config, workers, out))
