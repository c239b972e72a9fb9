# memsim/services/keys.py
from typing import NamedTuple


class ExpertKey(NamedTuple):
    """Identity of one expert: the MoE layer it sits in and its index there."""
    layer: int
    expert: int

    def __str__(self):
        return f"L{self.layer}/E{self.expert}"
