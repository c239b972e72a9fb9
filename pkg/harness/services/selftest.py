# harness/services/selftest.py
"""
A quick, deterministic pass over the lab's exact invariants. Each check
returns (passed, detail); the report renders one line per check with no
timings, so two runs print the same bytes.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from baselines.services.runners import run_ondemand, run_overlap
from drafting.services.affinity import affinity_from_vectors, nearest_draft_expert
from drafting.services.hotness import HotnessCounter, skewness
from drafting.services.policies import DraftPolicy
from memsim.services.keys import ExpertKey
from memsim.services.ledger import MigrationLedger
from memsim.services.residency import ResidencyState, ensure_resident
from memsim.services.tiers import Phase, TierConfig
from moe.services.prompts import make_prompts
from moe.services.routing import route_topk, softmax
from moe.services.spec import ModelSpec
from moe.services.weights import build_model
from specdec.services.config import SpecConfig
from specdec.services.engine import run_specmoe
from specdec.services.speedup import measure_lambda, speedup_eq1, speedup_eq2

logger = logging.getLogger(__name__)

SELFTEST_SPEC = ModelSpec(num_layers=4, experts_per_block=16, top_k=2, hidden_dim=32, ffn_dim=64,
                          vocab_size=64, gate_skew=1.5, seed=0)
SELFTEST_SEEDS = (0, 1, 2)
SELFTEST_NEW_TOKENS = 12
SELFTEST_WARMUP = 8


@dataclass
class SelftestReport:
    checks: List[Tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def render(self) -> str:
        lines = []
        for name, ok, detail in self.checks:
            lines.append(f"PASS {name}" if ok else f"FAIL {name}: {detail}")
        lines.append(f"{sum(ok for _, ok, _ in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


# -------------------------------------------------------------------
# CHECKS
# -------------------------------------------------------------------
def _check_softmax():
    a, b, c = softmax([0, 0]), softmax([math.log(2), 0]), softmax([1000, 0])
    ok = (np.allclose(a, [0.5, 0.5], atol=1e-12) and np.allclose(b, [2 / 3, 1 / 3], atol=1e-12)
          and abs(c[0] - 1) < 1e-12)
    return ok, f"{a}, {b}, {c}"


def _check_route_topk():
    got = (route_topk([3, 1, 2], 2), route_topk([5, 5, 1], 1))
    return got == ((0, 2), (0,)), str(got)


def _check_skewness():
    uniform = HotnessCounter(experts=16, layers=(0,))
    uniform.counts[0][:] = 10
    onehot = HotnessCounter(experts=16, layers=(0,))
    onehot.counts[0][3] = 40
    hand = HotnessCounter(experts=4, layers=(0,))
    hand.counts[0][:] = [70, 10, 10, 10]
    got = (skewness(uniform), skewness(onehot), skewness(hand))
    return got == (0.25, 1.0, 0.70), str(got)


def _check_speedup():
    got = (speedup_eq1(11, 10, 0.0), speedup_eq2(1, 10, 0.0, 1.0), speedup_eq2(7.265, 10, 0.05, 2.0))
    return abs(got[0] - 11) < 1e-12 and abs(got[1] - 1) < 1e-12 and abs(got[2] - 2.906) < 1e-12, str(got)


def _check_affinity_stub():
    table = affinity_from_vectors({0: np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])})
    got = (table.distance(0, 0, 1), table.distance(0, 0, 2), nearest_draft_expert(table, 0, 1, {0, 2}))
    return got == (5.0, 1.0, 2), str(got)


def _check_ensure_resident_bytes():
    tier = TierConfig.for_model(SELFTEST_SPEC)
    ledger = MigrationLedger()
    residency = ResidencyState(tier)
    keys = {ExpertKey(0, 1), ExpertKey(0, 2), ExpertKey(1, 3)}
    first = ensure_resident(keys, Phase.VERIFICATION, ledger, residency)
    again = ensure_resident(keys, Phase.VERIFICATION, ledger, residency)
    return (first, again, ledger.count) == (49152, 0, 3), f"{first}, {again}, {ledger.count}"


def _speculative_runs():
    weights = build_model(SELFTEST_SPEC)
    tier = TierConfig.for_model(SELFTEST_SPEC)
    for seed in SELFTEST_SEEDS:
        prompts = make_prompts(SELFTEST_SPEC, seed, 2)
        reference = run_ondemand(weights, prompts, tier, max_new_tokens=SELFTEST_NEW_TOKENS, seed=seed)
        for n_draft in (2, 4, 16):
            for policy in DraftPolicy.values:
                config = SpecConfig(gamma=5, batch=2, max_new_tokens=SELFTEST_NEW_TOKENS)
                result = run_specmoe(weights, config, policy, tier, prompts, n_draft=n_draft, seed=seed,
                                     warmup_steps=SELFTEST_WARMUP)
                yield seed, n_draft, policy, reference, result


def _check_speculative_invariants():
    for seed, n_draft, policy, reference, result in _speculative_runs():
        metrics = result.metrics
        where = f"seed={seed} N={n_draft} policy={policy}"
        if result.outputs != reference.outputs:
            return False, f"greedy output differs from on-demand ({where})"
        if metrics.bytes_spec != 0:
            return False, f"speculation migrated {metrics.bytes_spec} bytes ({where})"
        if metrics.ledger.duplicates(Phase.VERIFICATION):
            return False, f"duplicate verification migrations ({where})"
        if policy == DraftPolicy.HOT_TEMPORAL and any(metrics.repin_bytes):
            return False, f"hot_temporal replacement migrated bytes ({where})"
        if n_draft == SELFTEST_SPEC.experts_per_block and set(metrics.generated_per_step) != {6}:
            return False, f"N=E did not accept every draft ({where})"
        if not 1 <= metrics.tau <= 6:
            return False, f"tau {metrics.tau} out of bounds ({where})"
    return True, ""


def _check_overlap_ledger():
    weights = build_model(SELFTEST_SPEC)
    tier = TierConfig.for_model(SELFTEST_SPEC)
    prompts = make_prompts(SELFTEST_SPEC, 0, 2)
    ondemand = run_ondemand(weights, prompts, tier, max_new_tokens=SELFTEST_NEW_TOKENS)
    overlap = run_overlap(weights, prompts, tier, max_new_tokens=SELFTEST_NEW_TOKENS)
    same = ondemand.metrics.ledger.entries == overlap.metrics.ledger.entries
    faster = overlap.metrics.total_s <= ondemand.metrics.total_s
    return same and faster and ondemand.outputs == overlap.outputs, "overlap diverged from on-demand"


def _check_lambda_identity():
    weights = build_model(SELFTEST_SPEC)
    tier = TierConfig.for_model(SELFTEST_SPEC)
    prompts = make_prompts(SELFTEST_SPEC, 0, 1)
    result = run_specmoe(weights, SpecConfig(gamma=1, max_new_tokens=6), DraftPolicy.HOT_GLOBAL, tier, prompts,
                         warmup_steps=SELFTEST_WARMUP)
    lam = measure_lambda(result.metrics)
    return abs(lam - 1.0) < 1e-12, f"λ={lam}"


CHECKS: Tuple[Tuple[str, Callable], ...] = (
    ("softmax", _check_softmax),
    ("route_topk", _check_route_topk),
    ("skewness", _check_skewness),
    ("speedup", _check_speedup),
    ("affinity", _check_affinity_stub),
    ("ensure_resident", _check_ensure_resident_bytes),
    ("speculative invariants", _check_speculative_invariants),
    ("overlap ledger", _check_overlap_ledger),
    ("lambda identity", _check_lambda_identity),
)


def run_selftest() -> SelftestReport:
    report = SelftestReport()
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:
            logger.exception("selftest check %s raised", name)
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        report.checks.append((name, bool(ok), detail))
    return report
