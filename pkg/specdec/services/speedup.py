# specdec/services/speedup.py
"""
Analytic speedup of speculative decoding.

    single sequence:  S = τ / (γ·c + 1)
    batched, offload: S = τ / (γ·c + λ)

τ is the mean number of tokens generated per speculative step, c the
draft-to-target step latency ratio and λ the latency of verifying B·γ
tokens relative to one batched target step over B tokens.
"""
from dataclasses import dataclass
from typing import Dict, Iterable

from django.core.exceptions import ValidationError

from memsim.services.metrics import RunMetrics


def _check_domain(tau: float, gamma: int, c: float, lam: float = 1.0) -> None:
    if gamma < 1:
        raise ValidationError(f"γ ≥ 1 violated: {gamma}", code="gamma")
    if c < 0:
        raise ValidationError(f"c ≥ 0 violated: {c}", code="c")
    if not lam > 0:
        raise ValidationError(f"λ > 0 violated: {lam}", code="lambda")
    if not 1 <= tau <= gamma + 1:
        raise ValidationError(f"1 ≤ τ ≤ γ+1 violated: τ={tau}, γ={gamma}", code="tau")


def speedup_eq1(tau: float, gamma: int, c: float) -> float:
    _check_domain(tau, gamma, c)
    return tau / (gamma * c + 1)


def speedup_eq2(tau: float, gamma: int, c: float, lam: float) -> float:
    _check_domain(tau, gamma, c, lam)
    return tau / (gamma * c + lam)


def measure_lambda(metrics: RunMetrics) -> float:
    """Modeled verification latency over modeled single-step latency, averaged over the run."""
    verify, single = metrics.verify_reference_s, metrics.single_reference_s
    if not verify or not single or sum(single) <= 0:
        raise ValidationError("λ needs at least one verification and a non-zero step latency", code="empty_run")
    return (sum(verify) / len(verify)) / (sum(single) / len(single))


def lambda_by_batch(runs: Iterable[RunMetrics]) -> Dict[int, float]:
    """λ per batch size; runs sharing a batch size are pooled."""
    pooled: Dict[int, RunMetrics] = {}
    for metrics in runs:
        acc = pooled.setdefault(metrics.batch, RunMetrics(engine=metrics.engine, batch=metrics.batch))
        acc.verify_reference_s.extend(metrics.verify_reference_s)
        acc.single_reference_s.extend(metrics.single_reference_s)
    return {batch: measure_lambda(pooled[batch]) for batch in sorted(pooled)}


@dataclass(frozen=True)
class SpeedupInputs:
    tau: float
    gamma: int
    c: float
    lam: float
    batch: int = 1

    @classmethod
    def from_metrics(cls, metrics: RunMetrics) -> "SpeedupInputs":
        return cls(tau=metrics.tau, gamma=metrics.gamma, c=metrics.c_ratio,
                   lam=measure_lambda(metrics), batch=metrics.batch)

    @property
    def s_eq1(self) -> float:
        return speedup_eq1(self.tau, self.gamma, self.c)

    @property
    def s_eq2(self) -> float:
        return speedup_eq2(self.tau, self.gamma, self.c, self.lam)
