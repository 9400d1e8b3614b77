"""Replica scheduling and record streaming.

Each experiment is a list of independent tasks (replica ranges or single
evaluations).  Tasks run in a process pool, results are put back in task
order and every reduction walks replicas by index, so the aggregate record
does not depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import multiprocessing as mp
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Iterator, List

from .. import __version__
from ..errors import DprelabError
from . import experiments
from .config import ExperimentConfig, canonical_json

log = logging.getLogger(__name__)


class WorkerFailure(DprelabError):
    pass


def _execute(task):
    name, args = task
    return experiments.TASKS[name](*args)


def _pool(workers):
    try:
        ctx = mp.get_context("fork")
    except ValueError:  # pragma: no cover - platforms without fork
        ctx = mp.get_context()
    return ProcessPoolExecutor(max_workers=workers, mp_context=ctx)


def run_tasks(tasks: List[tuple], workers: int = 1) -> list:
    """Evaluate tasks, in order, retrying each failed task once."""
    results = [None] * len(tasks)
    failed = []
    if workers <= 1 or len(tasks) <= 1:
        for i, t in enumerate(tasks):
            try:
                results[i] = _execute(t)
            except Exception as exc:  # noqa: BLE001
                failed.append((i, exc))
    else:
        with _pool(min(workers, len(tasks))) as pool:
            futures = [pool.submit(_execute, t) for t in tasks]
            for i, f in enumerate(futures):
                try:
                    results[i] = f.result()
                except Exception as exc:  # noqa: BLE001
                    failed.append((i, exc))
    for i, exc in failed:
        log.warning("task %d (%s) failed with %r; retrying once", i, tasks[i][0], exc)
        try:
            results[i] = _execute(tasks[i])
        except Exception as exc2:
            raise WorkerFailure(f"task {i} ({tasks[i][0]}) failed twice: {exc2!r}") from exc2
    return results


def run(config: ExperimentConfig) -> Iterator[dict]:
    """Run one experiment and yield its records.

    Records come out as: replica or row records, the aggregate record,
    then a timing record.  Only the timing record holds wall time and
    execution settings.
    """
    config.validate()
    h = config.config_hash()
    exp = experiments.EXPERIMENTS[config.command]
    t0 = time.perf_counter()
    tasks = exp.plan(config)
    outputs = run_tasks(tasks, int(config.workers))
    rows, results = exp.reduce(config, outputs)
    for kind, payload in rows:
        rec = {"record": kind, "command": config.command, "config_hash": h}
        rec.update(payload)
        yield rec
    yield {"record": "aggregate", "command": config.command, "config_hash": h,
           "version": __version__, "config": config.echo(), "results": results}
    yield {"record": "timing", "command": config.command, "config_hash": h,
           "wall_time": time.perf_counter() - t0, "workers": int(config.workers),
           "output": config.output, "tasks": len(tasks)}


def dumps(record: dict) -> str:
    return canonical_json(record)


def write_records(records: Iterable[dict], path: str) -> int:
    """Stream records to a JSON Lines file ('-' for stdout); returns the count."""
    count = 0
    if path == "-":
        for r in records:
            sys.stdout.write(dumps(r) + "\n")
            count += 1
        sys.stdout.flush()
        return count
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")
            fh.flush()
            count += 1
    return count


def read_records(path: str) -> list:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def aggregate_bytes(records: Iterable[dict]) -> bytes:
    """Serialized aggregate records, the object of the determinism contract."""
    return b"\n".join(dumps(r).encode() for r in records if r["record"] == "aggregate")


def replay(record: dict, workers: int = 1) -> list:
    """Re-run an aggregate record from its embedded config echo."""
    cfg = ExperimentConfig.from_dict(dict(record["config"], workers=workers))
    return list(run(cfg))
