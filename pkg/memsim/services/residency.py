# memsim/services/residency.py
"""
Which tier holds each expert, and the two operations that move experts to
the device: on-demand residency for a step and draft-expert pinning.

Non-resident experts live on ``TierConfig.offload_tier``. Experts fetched
on demand are transient: they stay on the device until
``flush_transients`` runs at the end of the step that needed them, or
until a later migration needs their room. Pinned experts are never evicted.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Set

from core.exceptions import CapacityError
from memsim.services.keys import ExpertKey
from memsim.services.ledger import MigrationLedger
from memsim.services.tiers import Tier, TierConfig

logger = logging.getLogger(__name__)


@dataclass
class ResidencyState:
    tier: TierConfig
    # device residents in arrival order; value is the step they arrived at
    _device: Dict[ExpertKey, int] = field(default_factory=dict)
    _pinned: Set[ExpertKey] = field(default_factory=set)

    def location(self, key: ExpertKey) -> str:
        return Tier.DEVICE if key in self._device else self.tier.offload_tier

    def is_resident(self, key: ExpertKey) -> bool:
        return key in self._device

    def is_pinned(self, key: ExpertKey) -> bool:
        return key in self._pinned

    @property
    def resident(self) -> frozenset:
        return frozenset(self._device)

    @property
    def pinned(self) -> frozenset:
        return frozenset(self._pinned)

    @property
    def transients(self) -> list:
        return [key for key in self._device if key not in self._pinned]

    @property
    def device_bytes(self) -> int:
        return len(self._device) * self.tier.bytes_per_expert

    def check(self) -> None:
        """Raise CapacityError if the device is over budget or a pin is not resident."""
        if self.device_bytes > self.tier.device_capacity_bytes:
            raise CapacityError(
                f"device holds {self.device_bytes} bytes, capacity is {self.tier.device_capacity_bytes}"
            )
        stray = self._pinned.difference(self._device)
        if stray:
            raise CapacityError(f"pinned experts not on device: {sorted(stray)}")


# -------------------------------------------------------------------
# INTERNALS
# -------------------------------------------------------------------
def _make_room(residency: ResidencyState, protected: Set[ExpertKey]) -> None:
    """Evict transients, oldest first, until one more expert fits."""
    bpe = residency.tier.bytes_per_expert
    capacity = residency.tier.device_capacity_bytes
    while residency.device_bytes + bpe > capacity:
        victim = next((k for k in residency.transients if k not in protected), None)
        if victim is None:
            raise CapacityError(
                f"cannot fit another {bpe}-byte expert: {residency.device_bytes} of {capacity} bytes "
                f"in use and nothing evictable"
            )
        del residency._device[victim]
        logger.debug("evicted %s", victim)


def _migrate(residency: ResidencyState, key: ExpertKey, phase: str, ledger: MigrationLedger,
             step: int, protected: Set[ExpertKey]) -> int:
    _make_room(residency, protected)
    residency._device[key] = step
    ledger.record(phase, step, key, residency.tier.bytes_per_expert)
    return residency.tier.bytes_per_expert


def _as_keys(keys: Iterable) -> Set[ExpertKey]:
    return {ExpertKey(*key) for key in keys}


# -------------------------------------------------------------------
# OPERATIONS
# -------------------------------------------------------------------
def ensure_resident(keys: Iterable[ExpertKey], phase: str, ledger: MigrationLedger,
                    residency: ResidencyState, step: int = 0) -> int:
    """
    Bring every key onto the device, migrating each missing one exactly once.

    Keys are processed in sorted order so ledger entries are deterministic.
    Returns the number of bytes migrated.
    """
    wanted = _as_keys(keys)
    moved = 0
    for key in sorted(wanted):
        if key not in residency._device:
            moved += _migrate(residency, key, phase, ledger, step, protected=wanted)
    if moved:
        logger.debug("%s step %d: migrated %d bytes for %d experts", phase, step, moved, len(wanted))
    return moved


def pin_draft_experts(keys: Iterable[ExpertKey], residency: ResidencyState, ledger: MigrationLedger,
                      phase: str, step: int = 0) -> int:
    """
    Make ``keys`` the pinned draft set.

    Previously pinned experts outside ``keys`` become ordinary transients.
    Keys already on the device cost nothing; the rest are migrated and
    recorded under ``phase``. The pinned set is left untouched when the new
    set cannot fit.
    """
    wanted = _as_keys(keys)
    bpe = residency.tier.bytes_per_expert
    capacity = residency.tier.device_capacity_bytes
    pinned_bytes = len(wanted) * bpe
    if pinned_bytes > capacity:
        raise CapacityError(f"{len(wanted)} pinned experts need {pinned_bytes} bytes, capacity is {capacity}")
    missing = [key for key in sorted(wanted) if key not in residency._device]

    previous = set(residency._pinned)
    residency._pinned.intersection_update(wanted)
    moved = 0
    try:
        for key in missing:
            moved += _migrate(residency, key, phase, ledger, step, protected=wanted)
    except CapacityError:
        residency._pinned = previous
        raise
    residency._pinned.update(wanted)
    return moved


def flush_transients(residency: ResidencyState) -> int:
    """Send every unpinned device resident back to its offload tier; returns how many left."""
    victims = residency.transients
    for key in victims:
        del residency._device[key]
    return len(victims)
