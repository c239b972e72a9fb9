# memsim/services/ledger.py
"""
Append-only, byte-exact record of every expert migration.
"""
import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, TextIO, Tuple

from memsim.services.keys import ExpertKey
from memsim.services.tiers import Phase

LEDGER_CSV_HEADER = ("phase", "step", "layer", "expert", "bytes")


@dataclass(frozen=True)
class LedgerEntry:
    phase: str
    step: int
    key: ExpertKey
    bytes: int


@dataclass(frozen=True)
class LedgerSnapshot:
    totals: Tuple[Tuple[str, int], ...]
    total: int
    count: int

    def phase_total(self, phase: str) -> int:
        return dict(self.totals).get(phase, 0)


@dataclass
class MigrationLedger:
    _entries: List[LedgerEntry] = field(default_factory=list)
    _totals: Dict[str, int] = field(default_factory=dict)

    def record(self, phase: str, step: int, key: ExpertKey, nbytes: int) -> LedgerEntry:
        entry = LedgerEntry(phase=str(phase), step=int(step), key=ExpertKey(*key), bytes=int(nbytes))
        self._entries.append(entry)
        self._totals[entry.phase] = self._totals.get(entry.phase, 0) + entry.bytes
        return entry

    @property
    def entries(self) -> Tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    @property
    def total(self) -> int:
        return sum(self._totals.values())

    @property
    def count(self) -> int:
        return len(self._entries)

    def phase_total(self, phase: str) -> int:
        return self._totals.get(str(phase), 0)

    def snapshot(self) -> LedgerSnapshot:
        totals = tuple(sorted(self._totals.items()))
        return LedgerSnapshot(totals=totals, total=self.total, count=self.count)

    def duplicates(self, phase: str = Phase.VERIFICATION) -> List[Tuple[int, ExpertKey]]:
        """(step, key) pairs migrated more than once within one instance of ``phase``."""
        seen = Counter((e.step, e.key) for e in self._entries if e.phase == str(phase))
        return sorted(k for k, n in seen.items() if n > 1)

    def bytes_at(self, phase: str, step: int) -> int:
        return sum(e.bytes for e in self._entries if e.phase == str(phase) and e.step == step)


def reset_ledger(ledger: MigrationLedger) -> MigrationLedger:
    """Empty the ledger in place; take ``snapshot()`` first to keep the old totals."""
    ledger._entries.clear()
    ledger._totals.clear()
    return ledger


def export_ledger_csv(ledger: MigrationLedger, stream: TextIO) -> int:
    """Write ``phase,step,layer,expert,bytes`` rows; returns the number of rows."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(LEDGER_CSV_HEADER)
    for entry in ledger.entries:
        writer.writerow((entry.phase, entry.step, entry.key.layer, entry.key.expert, entry.bytes))
    return ledger.count
