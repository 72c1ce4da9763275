"""Experiment configuration, drivers and the replication runner."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import BudgetExceeded
from .config import ExperimentConfig, load_config, parse_config
from .drivers import DRIVERS, context
from .io import manifest_for, write_json, write_jsonl, write_records


@dataclass
class ExperimentResult:
    records: list[dict]
    summary: dict
    gates: dict
    manifest: dict
    fields: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.gates.values())


def _job(args):
    cfg, prep, i = args
    return i, DRIVERS[cfg.kind].replicate(cfg, prep, i)


def run_replications(cfg: ExperimentConfig, prep: dict, workers: int = 1) -> list[dict]:
    jobs = [(cfg, prep, i) for i in range(cfg.replications)]
    if workers <= 1:
        results = [_job(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=chunk))
    results.sort(key=lambda t: t[0])
    return [r for _, rows in results for r in rows]


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int | None = None,
                   jsonl: bool = False) -> ExperimentResult:
    """Run every replication and write manifest, records and summary.

    The manifest is written before any record; on a budget failure the
    summary is written with ``aborted`` set and the error re-raised.
    """
    driver = DRIVERS[cfg.kind]
    workers = workers or cfg.workers
    ctx = context(cfg)
    prep = driver.prepare(cfg, ctx)
    manifest = manifest_for(cfg, gates={k: v for k, v in prep.items() if k == "pilot"})
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", manifest)
    try:
        records = run_replications(cfg, prep, workers)
    except BudgetExceeded as exc:
        if out is not None:
            write_json(out / "summary.json", {"aborted": True, "error": str(exc)})
        raise
    summary, gates = driver.summarize(cfg, prep, records)
    summary = {"experiment": cfg.kind, "replications": cfg.replications, **summary,
               "gates": gates, "passed": all(gates.values())}
    if out is not None:
        write_records(out / "records.csv", driver.fields, records)
        if jsonl:
            write_jsonl(out / "records.jsonl", driver.fields, records)
        write_json(out / "summary.json", summary)
    return ExperimentResult(records, summary, gates, manifest, driver.fields)


__all__ = ["ExperimentConfig", "ExperimentResult", "load_config", "parse_config",
           "run_experiment", "run_replications"]
