# harness/services/experiments.py
"""
Sweep orchestration: every cell of engines × policy × batch × γ × N ×
bandwidth × seed runs one engine and becomes one ResultRecord.

Rows come back sorted by cell, whatever order the cells finished in.
"""
import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, NamedTuple, Optional

from django.db import transaction

from baselines.services.runners import run_baseline
from core.exceptions import ExperimentCellError
from drafting.services.affinity import AffinityTable, RemapMode
from harness.models import Engine, Experiment, ResultRecord
from harness.services.config import ExperimentConfig, serialize_config
from memsim.services.metrics import DecodeResult
from moe.services.prompts import make_prompts
from moe.services.weights import ModelWeights, build_model
from specdec.services.engine import resolve_affinity, run_specmoe
from specdec.services.speedup import SpeedupInputs

logger = logging.getLogger(__name__)


class Cell(NamedTuple):
    engine: str
    policy: str
    batch: int
    gamma: int
    n_draft: int
    bandwidth: float
    seed: int

    def __str__(self):
        return (f"{self.engine}/{self.policy} B={self.batch} γ={self.gamma} N={self.n_draft} "
                f"bw={self.bandwidth:g} seed={self.seed}")


# -------------------------------------------------------------------
# CELLS
# -------------------------------------------------------------------
def sweep_cells(config: ExperimentConfig) -> List[Cell]:
    """All cells, sorted; baselines ignore the policy, γ and N axes."""
    experts = config.model.experts_per_block
    cells = set()
    for engine in config["engines"]:
        for batch in config["batch"]:
            for bandwidth in config.bandwidths:
                for seed in config["seeds"]:
                    if engine == Engine.SPECMOE:
                        for policy in config["policy"]:
                            for gamma in config["gamma"]:
                                for n_draft in config["n_draft"]:
                                    cells.add(Cell(str(engine), str(policy), batch, gamma, n_draft,
                                                   float(bandwidth), seed))
                    else:
                        pinned = config.baseline_config(engine).cache_size(experts)
                        cells.add(Cell(str(engine), str(engine), batch, 0, pinned, float(bandwidth), seed))
    return sorted(cells)


def text_hash(outputs: List[List[int]]) -> str:
    text = ";".join(",".join(str(t) for t in tokens) for tokens in outputs)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def _row(cell: Cell, result: DecodeResult, wall_clock_s: float) -> ResultRecord:
    metrics = result.metrics
    timing = metrics.timing
    if cell.engine == Engine.SPECMOE:
        speedup = SpeedupInputs.from_metrics(metrics)
        tau, lam, s_eq1, s_eq2, c = speedup.tau, speedup.lam, speedup.s_eq1, speedup.s_eq2, speedup.c
    else:
        tau, lam, s_eq1, s_eq2, c = 1.0, 1.0, 1.0, 1.0, 0.0
    return ResultRecord(
        engine=cell.engine, policy=cell.policy, batch=cell.batch, gamma=cell.gamma, n_draft=cell.n_draft,
        bandwidth=cell.bandwidth, seed=cell.seed,
        tau=tau, tokens_per_sec=metrics.tokens_per_sec,
        bytes_total=metrics.bytes_total, bytes_spec=metrics.bytes_spec,
        bytes_verify=metrics.bytes_verify if cell.engine == Engine.SPECMOE else metrics.bytes_baseline,
        bytes_setup=metrics.bytes_setup,
        lam=lam, s_eq1=s_eq1, s_eq2=s_eq2, c_ratio=c,
        compute_s=timing.compute_s, migration_s=timing.migration_s, wall_clock_s=wall_clock_s,
        steps=metrics.steps, tokens=metrics.tokens_emitted, text_hash=text_hash(result.outputs),
    )


def run_cell(config: ExperimentConfig, cell: Cell, weights: Optional[ModelWeights] = None,
             affinity: Optional[AffinityTable] = None) -> ResultRecord:
    weights = weights or build_model(config.model)
    tier = config.tier.with_source_bandwidth(cell.bandwidth)
    prompts = make_prompts(weights.spec, cell.seed, cell.batch, config["prompt_len"])
    started = time.perf_counter()
    if cell.engine == Engine.SPECMOE:
        result = run_specmoe(
            weights, config.spec_config(cell.gamma, cell.batch), cell.policy, tier, prompts,
            n_draft=cell.n_draft, seed=cell.seed, warmup_steps=config["warmup_steps"],
            remap=config["remap"], affinity=affinity,
        )
    else:
        result = run_baseline(
            weights, prompts, tier, config.baseline_config(cell.engine),
            mode=config["mode"], temperature=config["temperature"],
            max_new_tokens=config["max_new_tokens"], seed=cell.seed,
        )
    return _row(cell, result, time.perf_counter() - started)


# -------------------------------------------------------------------
# SWEEP
# -------------------------------------------------------------------
def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> List[ResultRecord]:
    """Run every cell; a failing cell raises ExperimentCellError naming it."""
    cells = sweep_cells(config)
    weights = build_model(config.model)
    # the random remap table depends on the run seed, so only the affinity one is shared
    shared = resolve_affinity(weights, RemapMode.AFFINITY, 0) if config["remap"] == RemapMode.AFFINITY else None
    workers = workers or config["workers"]
    logger.info("running %d cells on %d worker(s)", len(cells), workers)

    def job(cell: Cell) -> ResultRecord:
        try:
            row = run_cell(config, cell, weights, shared)
        except Exception as exc:
            raise ExperimentCellError(cell, exc) from exc
        logger.info("cell %s: tau=%.3f bytes=%d", cell, row.tau, row.bytes_total)
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, cells))
    else:
        rows = [job(cell) for cell in cells]
    return sorted(rows, key=ResultRecord.sort_key)


@transaction.atomic
def save_experiment(config: ExperimentConfig, rows: List[ResultRecord], name: str = "") -> Experiment:
    experiment = Experiment.objects.create(name=name, config_text=serialize_config(config))
    for row in rows:
        row.experiment = experiment
    ResultRecord.objects.bulk_create(rows)
    return experiment
