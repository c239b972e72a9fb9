# memsim/services/metrics.py
"""
Everything a decoding run measures, and the numbers derived from it.
"""
from dataclasses import dataclass, field
from functools import reduce
from typing import TYPE_CHECKING, List, NamedTuple, Optional

from django.core.exceptions import ValidationError

from memsim.services.latency import ZERO_TIMING, StepTiming
from memsim.services.ledger import MigrationLedger
from memsim.services.tiers import Phase

if TYPE_CHECKING:
    from drafting.services.hotness import HotnessCounter


@dataclass
class RunMetrics:
    """
    ``timings`` holds every modeled StepTiming that adds to the run's
    decoding time. ``generated_per_step`` keeps tokens generated per
    (sequence, speculative step) before max_new_tokens truncation.

    The two ``*_reference_s`` lists are the latencies the speedup model
    compares: a target forward over the verified draft positions versus a
    single target step over the same batch.
    """
    engine: str
    batch: int
    gamma: int = 0
    ledger: MigrationLedger = field(default_factory=MigrationLedger)
    setup_ledger: MigrationLedger = field(default_factory=MigrationLedger)
    timings: List[StepTiming] = field(default_factory=list)
    generated_per_step: List[int] = field(default_factory=list)
    verify_reference_s: List[float] = field(default_factory=list)
    single_reference_s: List[float] = field(default_factory=list)
    draft_iteration_s: List[float] = field(default_factory=list)
    repin_bytes: List[int] = field(default_factory=list)
    tokens_emitted: int = 0
    steps: int = 0
    pinned_per_layer: int = 0
    hotness: Optional["HotnessCounter"] = None
    wall_clock_s: float = 0.0

    # ---------------------------------------------------------------
    # BYTES
    # ---------------------------------------------------------------
    @property
    def bytes_total(self) -> int:
        return self.ledger.total

    @property
    def bytes_spec(self) -> int:
        return self.ledger.phase_total(Phase.SPECULATION)

    @property
    def bytes_verify(self) -> int:
        return self.ledger.phase_total(Phase.VERIFICATION)

    @property
    def bytes_baseline(self) -> int:
        return self.ledger.phase_total(Phase.BASELINE_STEP)

    @property
    def bytes_setup(self) -> int:
        return self.setup_ledger.total

    # ---------------------------------------------------------------
    # TIME
    # ---------------------------------------------------------------
    @property
    def timing(self) -> StepTiming:
        return reduce(lambda a, b: a + b, self.timings, ZERO_TIMING)

    @property
    def total_s(self) -> float:
        return self.timing.total_s

    @property
    def tokens_per_sec(self) -> float:
        """Modeled throughput: tokens emitted over modeled decoding time."""
        total = self.total_s
        return self.tokens_emitted / total if total > 0 else 0.0

    # ---------------------------------------------------------------
    # SPECULATION STATISTICS
    # ---------------------------------------------------------------
    @property
    def tau(self) -> float:
        if not self.generated_per_step:
            return 1.0
        return sum(self.generated_per_step) / len(self.generated_per_step)

    @property
    def c_ratio(self) -> float:
        """Mean draft-iteration latency over mean single target step latency."""
        if not self.draft_iteration_s or not self.single_reference_s:
            return 0.0
        draft = sum(self.draft_iteration_s) / len(self.draft_iteration_s)
        single = sum(self.single_reference_s) / len(self.single_reference_s)
        if single <= 0:
            raise ValidationError("single-step reference latency is zero", code="empty_run")
        return draft / single


class DecodeResult(NamedTuple):
    outputs: List[List[int]]
    metrics: RunMetrics

