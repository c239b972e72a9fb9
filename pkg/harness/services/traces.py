# harness/services/traces.py
"""
Routing traces: one row per (step, sequence, MoE layer) with the gate's
raw top-K picks.

    # moelab-trace v1 experts=16 top_k=2
    step,sequence,layer,experts
    0,0,0,"3,5"

``analyze_trace`` turns the counts into the skewness metric, the hottest
experts per layer and a heatmap-ready (layer, expert) frequency table.
"""
import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, TextIO, Tuple, Union

from baselines.services.runners import run_ondemand
from core.exceptions import TraceFormatError
from drafting.services.hotness import HotnessCounter, skewness
from memsim.services.tiers import TierConfig
from moe.services.weights import ModelWeights

TRACE_HEADER_RE = re.compile(r"^# moelab-trace v1 experts=(\d+) top_k=(\d+)$")
TRACE_COLUMNS = ("step", "sequence", "layer", "experts")
FREQUENCY_COLUMNS = ("layer", "expert", "count", "fraction")


# -------------------------------------------------------------------
# RECORDING
# -------------------------------------------------------------------
@dataclass
class TraceRecorder:
    """Collects rows from an engine's trace sink."""
    experts: int
    top_k: int
    rows: List[Tuple[int, int, int, Tuple[int, ...]]] = field(default_factory=list)

    def __call__(self, step: int, sequence: int, layer: int, picks: Tuple[int, ...]) -> None:
        self.rows.append((step, sequence, layer, tuple(int(e) for e in picks)))

    def write(self, stream: TextIO) -> int:
        stream.write(f"# moelab-trace v1 experts={self.experts} top_k={self.top_k}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for step, sequence, layer, picks in self.rows:
            writer.writerow((step, sequence, layer, ",".join(str(e) for e in picks)))
        return len(self.rows)


# -------------------------------------------------------------------
# INGESTION
# -------------------------------------------------------------------
def _int(value: str, what: str, line: int) -> int:
    try:
        number = int(value)
    except ValueError:
        raise TraceFormatError(f"{what} {value!r} is not an integer", line=line)
    if number < 0:
        raise TraceFormatError(f"{what} must be ≥ 0, got {number}", line=line)
    return number


def read_trace(stream: TextIO) -> HotnessCounter:
    match = TRACE_HEADER_RE.match(stream.readline().strip())
    if not match:
        raise TraceFormatError("missing '# moelab-trace v1 experts=E top_k=K' header", line=1)
    experts, top_k = int(match.group(1)), int(match.group(2))

    reader = csv.reader(stream)
    if tuple(next(reader, ())) != TRACE_COLUMNS:
        raise TraceFormatError(f"expected columns {','.join(TRACE_COLUMNS)}", line=2)

    picks_by_row: List[Tuple[int, Tuple[int, ...]]] = []
    for line, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != 4:
            raise TraceFormatError(f"expected 4 fields, got {len(row)}", line=line)
        _int(row[0], "step", line)
        _int(row[1], "sequence", line)
        layer = _int(row[2], "layer", line)
        picks = tuple(_int(p.strip(), "expert", line) for p in row[3].split(",") if p.strip())
        if len(picks) != top_k:
            raise TraceFormatError(f"expected {top_k} experts, got {len(picks)}", line=line)
        if any(e >= experts for e in picks):
            raise TraceFormatError(f"expert index ≥ E={experts} in {picks}", line=line)
        if len(set(picks)) != len(picks):
            raise TraceFormatError(f"repeated expert in {picks}", line=line)
        picks_by_row.append((layer, picks))

    counter = HotnessCounter(experts=experts, layers=tuple(sorted({layer for layer, _ in picks_by_row})))
    for layer, picks in picks_by_row:
        counter.add(layer, picks)
    return counter


def ingest_trace(path: Union[str, Path]) -> HotnessCounter:
    try:
        with open(path, encoding="utf-8", newline="") as stream:
            return read_trace(stream)
    except OSError as exc:
        raise TraceFormatError(f"cannot read trace {path}: {exc}")


# -------------------------------------------------------------------
# ANALYSIS
# -------------------------------------------------------------------
@dataclass(frozen=True)
class TraceReport:
    skewness: float
    routed_tokens: int
    hottest: Dict[int, List[int]]
    frequencies: List[Tuple[int, int, int, float]]

    def lines(self) -> List[str]:
        out = [f"skewness (top 25%): {self.skewness:.4f}", f"routed tokens: {self.routed_tokens}"]
        for layer, experts in self.hottest.items():
            out.append(f"layer {layer} hottest: {', '.join(str(e) for e in experts)}")
        return out


def analyze_trace(counter: HotnessCounter, top_fraction: float = 0.25) -> TraceReport:
    value = skewness(counter, top_fraction)
    top_n = math.ceil(counter.experts * top_fraction)
    frequencies = []
    for layer in counter.layers:
        counts = counter.counts[layer]
        total = int(counts.sum())
        for expert, count in enumerate(counts):
            frequencies.append((layer, expert, int(count), int(count) / total if total else 0.0))
    return TraceReport(
        skewness=value,
        routed_tokens=counter.routed_tokens,
        hottest={layer: counter.top(layer, top_n) for layer in counter.layers},
        frequencies=frequencies,
    )


def export_frequencies(report: TraceReport, stream: TextIO) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FREQUENCY_COLUMNS)
    for layer, expert, count, fraction in report.frequencies:
        writer.writerow((layer, expert, count, repr(fraction)))
    return len(report.frequencies)


def record_ondemand_trace(weights: ModelWeights, prompts: List[List[int]], tier: TierConfig,
                          max_new_tokens: int, seed: int = 0) -> Tuple[TraceRecorder, HotnessCounter]:
    """Greedy on-demand run with a trace sink; returns the trace and the run's own counters."""
    spec = weights.spec
    recorder = TraceRecorder(experts=spec.experts_per_block, top_k=spec.top_k)
    result = run_ondemand(weights, prompts, tier, max_new_tokens=max_new_tokens, seed=seed, trace=recorder)
    return recorder, result.metrics.hotness
