# drafting/services/affinity.py
"""
Pairwise L2 distances between the experts of each MoE layer, and the
nearest-draft-expert lookup the draft model uses to remap gate picks.

File format (text, one table per file)::

    # moelab-affinity v1 experts=16
    layer,i,j,distance
    0,0,1,5.0
    ...

Only the upper triangle (i < j) is stored; distances are written with
``repr`` so a load reproduces the exact floats.
"""
import csv
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Iterable, Mapping, TextIO

import numpy as np
from django.core.exceptions import ValidationError
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.rng import SALT_RANDOM_REMAP, make_rng

if TYPE_CHECKING:
    from moe.services.spec import ModelSpec
    from moe.services.weights import ModelWeights

logger = logging.getLogger(__name__)

AFFINITY_HEADER_PREFIX = "# moelab-affinity v1"
AFFINITY_COLUMNS = ("layer", "i", "j", "distance")


class RemapMode(models.TextChoices):
    AFFINITY = "affinity", _("Nearest expert by weight distance")
    RANDOM = "random", _("Seeded random stand-in")


@dataclass(frozen=True)
class AffinityTable:
    distances: Dict[int, np.ndarray]  # moe layer -> (E, E)

    @property
    def layers(self) -> tuple:
        return tuple(sorted(self.distances))

    @property
    def experts(self) -> int:
        return next(iter(self.distances.values())).shape[0]

    def distance(self, layer: int, i: int, j: int) -> float:
        return float(self.distances[layer][i, j])

    def validate(self) -> "AffinityTable":
        if not self.distances:
            raise ValidationError("affinity table has no layers", code="affinity")
        for layer, matrix in self.distances.items():
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValidationError(f"layer {layer}: distance matrix must be square", code="affinity")
            if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
                raise ValidationError(f"layer {layer}: distances must be finite and ≥ 0", code="affinity")
            if not np.array_equal(matrix, matrix.T):
                raise ValidationError(f"layer {layer}: distance matrix is not symmetric", code="affinity")
            if np.any(np.diag(matrix) != 0):
                raise ValidationError(f"layer {layer}: diagonal must be zero", code="affinity")
        return self


# -------------------------------------------------------------------
# BUILDERS
# -------------------------------------------------------------------
def affinity_from_vectors(vectors: Mapping[int, np.ndarray]) -> AffinityTable:
    """``vectors[layer]`` is (E, P): one flattened parameter vector per expert."""
    distances = {}
    for layer in sorted(vectors):
        flat = np.asarray(vectors[layer], dtype=np.float64)
        matrix = np.empty((flat.shape[0], flat.shape[0]))
        for i in range(flat.shape[0]):
            matrix[i] = np.linalg.norm(flat - flat[i], axis=1)
        upper = np.triu(matrix, k=1)
        distances[layer] = _frozen(upper + upper.T)
    return AffinityTable(distances).validate()


def build_affinity_table(weights: "ModelWeights") -> AffinityTable:
    """Distance between experts = L2 norm of the difference of their concatenated up‖down weights."""
    spec = weights.spec
    vectors = {
        layer: np.stack([weights.expert_vector(layer, e) for e in range(spec.experts_per_block)])
        for layer in spec.moe_layers
    }
    table = affinity_from_vectors(vectors)
    logger.debug("affinity table built for %d layers x %d experts", len(table.layers), table.experts)
    return table


def build_random_affinity_table(spec: "ModelSpec", seed: int) -> AffinityTable:
    """Symmetric uniform(1, 2) distances: remapping by it picks an arbitrary draft expert."""
    rng = make_rng(seed, SALT_RANDOM_REMAP)
    E = spec.experts_per_block
    distances = {}
    for layer in spec.moe_layers:
        upper = np.triu(rng.uniform(1.0, 2.0, size=(E, E)), k=1)
        distances[layer] = _frozen(upper + upper.T)
    return AffinityTable(distances).validate()


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# -------------------------------------------------------------------
# LOOKUP
# -------------------------------------------------------------------
def nearest_draft_expert(table: AffinityTable, layer: int, raw_pick: int,
                         draft_set: Iterable[int], excluded: Iterable[int] = ()) -> int:
    """
    The draft expert closest to ``raw_pick``, skipping ``excluded``.
    A draft member is its own nearest; equal distances go to the lower index.
    """
    candidates = set(draft_set).difference(excluded)
    if not candidates:
        raise ValidationError(
            f"no draft expert left for layer {layer} (raw pick {raw_pick})", code="empty_candidates"
        )
    if raw_pick in candidates:
        return int(raw_pick)
    row = table.distances[layer][raw_pick]
    return int(min(candidates, key=lambda e: (row[e], e)))


# -------------------------------------------------------------------
# PERSISTENCE
# -------------------------------------------------------------------
def save_affinity_table(table: AffinityTable, stream: TextIO) -> int:
    """Write the upper triangle; returns the number of data rows."""
    stream.write(f"{AFFINITY_HEADER_PREFIX} experts={table.experts}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(AFFINITY_COLUMNS)
    rows = 0
    for layer in table.layers:
        matrix = table.distances[layer]
        for i in range(table.experts):
            for j in range(i + 1, table.experts):
                writer.writerow((layer, i, j, repr(float(matrix[i, j]))))
                rows += 1
    return rows


def load_affinity_table(stream: TextIO) -> AffinityTable:
    header = stream.readline().strip()
    if not header.startswith(AFFINITY_HEADER_PREFIX):
        raise ValidationError(f"not an affinity file (header {header!r})", code="affinity_header")
    try:
        experts = int(header.rsplit("experts=", 1)[1])
    except (IndexError, ValueError):
        raise ValidationError("affinity header lacks experts=E", code="affinity_header")

    reader = csv.reader(stream)
    columns = next(reader, None)
    if tuple(columns or ()) != AFFINITY_COLUMNS:
        raise ValidationError(f"expected columns {','.join(AFFINITY_COLUMNS)}", code="affinity_header")

    distances: Dict[int, np.ndarray] = {}
    for line, row in enumerate(reader, start=3):
        try:
            layer, i, j, value = int(row[0]), int(row[1]), int(row[2]), float(row[3])
        except (IndexError, ValueError):
            raise ValidationError(f"line {line}: malformed affinity row {row!r}", code="affinity_row")
        if not (0 <= i < j < experts):
            raise ValidationError(f"line {line}: expert pair ({i}, {j}) out of range", code="affinity_row")
        matrix = distances.setdefault(layer, np.zeros((experts, experts)))
        matrix[i, j] = matrix[j, i] = value
    return AffinityTable({layer: _frozen(m) for layer, m in distances.items()}).validate()
