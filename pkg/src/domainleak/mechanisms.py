"""Noise mechanisms, seeded randomness, and privacy-budget accounting.

Design notes:
  * Laplace sampling is a plain inverse-CDF transform of a uniform draw.
    No discrete/snapping hardening is applied; floating-point attacks on
    the noise itself are a documented non-goal.
  * Gaussian noise is calibrated through zero-concentrated DP: a stage that
    runs T measurements of L2 sensitivity s at scale sigma accumulates
    rho = T * s^2 / (2 sigma^2), and rho-zCDP implies
    (rho + 2*sqrt(rho*ln(1/delta)), delta)-DP.
  * Mechanisms do not write the ledger themselves; the pipeline operation
    that applies them charges one entry per mechanism application (one
    entry for a whole noisy histogram, not one per bin).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np


class MechanismError(ValueError):
    """Invalid mechanism parameters (non-positive scale, empty scores, ...)."""


class BudgetError(RuntimeError):
    """A charge would exceed the configured privacy budget."""


# Sentinel recorded when a pipeline stage reads raw data without DP.
NON_DP_LEAK = "NON-DP LEAK"


class RandomStream:
    """Deterministic random generator tree keyed by a 64-bit seed.

    ``child(*labels)`` derives an independent stream by hashing the parent
    seed with the labels, so parallel shadow runs can be handed streams up
    front and scheduling order never affects results.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def derive_seed(cls, seed: int, *labels) -> int:
        h = hashlib.blake2b(digest_size=8)
        h.update(str(int(seed)).encode())
        for label in labels:
            h.update(b"/")
            h.update(str(label).encode())
        return int.from_bytes(h.digest(), "little")

    def child(self, *labels) -> "RandomStream":
        return RandomStream(self.derive_seed(self.seed, *labels))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size=size)


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-stage epsilon allowance; delta applies to the model stage only."""

    eps_extract: float = 0.0
    eps_disc: float = 0.0
    eps_model: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("eps_extract", "eps_disc", "eps_model"):
            if getattr(self, name) < 0:
                raise MechanismError(f"{name} must be non-negative")
        if not 0 <= self.delta < 1:
            raise MechanismError("delta must lie in [0, 1)")

    def stage_cap(self, stage: str) -> float:
        return {"extract": self.eps_extract, "disc": self.eps_disc, "model": self.eps_model}[
            stage
        ]


@dataclass(frozen=True)
class LedgerEntry:
    stage: str
    mechanism: str
    eps: float = 0.0
    delta: float = 0.0
    rho: float | None = None  # zCDP charge; converted to eps at the stage delta
    spent: bool = True  # False marks budget returned unused

    def to_json(self) -> dict:
        rec = {
            "stage": self.stage,
            "mechanism": self.mechanism,
            "eps": self.eps if math.isfinite(self.eps) else "inf",
            "delta": self.delta,
        }
        if self.rho is not None:
            rec["rho"] = self.rho
        if not self.spent:
            rec["spent"] = False
        return rec


class BudgetLedger:
    """Append-only record of every DP mechanism application in a pipeline.

    When constructed with a PrivacyBudget, each charge is checked against
    the per-stage cap (small float slack); totals are queried per stage.
    Non-DP reads are recorded with an infinite-epsilon sentinel entry and
    excluded from totals.
    """

    _SLACK = 1e-9

    def __init__(self, budget: PrivacyBudget | None = None):
        self.budget = budget
        self.entries: list[LedgerEntry] = []

    def charge(self, stage, mechanism, eps=0.0, delta=0.0, rho=None, spent=True):
        if eps < 0 or delta < 0 or (rho is not None and rho < 0):
            raise MechanismError("ledger charges must be non-negative")
        entry = LedgerEntry(stage, mechanism, float(eps), float(delta), rho, spent)
        self.entries.append(entry)
        if self.budget is not None and math.isfinite(eps):
            cap = self.budget.stage_cap(stage)
            total, _ = self.stage_totals(stage, self.budget.delta or None)
            if total > cap * (1 + self._SLACK) + self._SLACK:
                raise BudgetError(
                    f"stage {stage!r} total {total} exceeds configured cap {cap}"
                )
        return entry

    def mark_leak(self, stage: str, mechanism: str):
        """Record a non-DP data access (an infinite-epsilon sentinel)."""
        self.entries.append(LedgerEntry(stage, f"{mechanism} {NON_DP_LEAK}", math.inf, 0.0))

    @property
    def has_leak(self) -> bool:
        return any(NON_DP_LEAK in e.mechanism for e in self.entries)

    def stage_totals(self, stage: str, delta: float | None = None) -> tuple[float, float]:
        """(eps, delta) total for one stage: linear eps plus converted zCDP.

        ``delta`` is required when the stage holds rho entries; it is the
        delta at which the accumulated rho is converted to epsilon.
        """
        eps_sum = math.fsum(
            e.eps for e in self.entries if e.stage == stage and math.isfinite(e.eps)
        )
        delta_sum = math.fsum(e.delta for e in self.entries if e.stage == stage)
        rho_sum = math.fsum(e.rho for e in self.entries if e.stage == stage and e.rho)
        if rho_sum > 0:
            if delta is None:
                raise MechanismError(f"stage {stage!r} has zCDP entries; delta required")
            eps_sum += eps_for_rho(rho_sum, delta)
            delta_sum += delta
        return eps_sum, delta_sum

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.entries]


def laplace(scale: float, rng: RandomStream, size=None):
    """Zero-centered Laplace draw(s) via inverse CDF on a uniform draw."""
    if scale <= 0:
        raise MechanismError(f"laplace scale must be positive, got {scale}")
    u = rng.gen.uniform(-0.5, 0.5, size=size)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def gaussian(sigma: float, rng: RandomStream, size=None):
    """Zero-centered Gaussian draw(s) with standard deviation sigma."""
    if sigma <= 0:
        raise MechanismError(f"gaussian sigma must be positive, got {sigma}")
    return rng.gen.normal(0.0, sigma, size=size)


def two_sided_geometric(eps: float, sensitivity: int, rng: RandomStream, size=None):
    """Integer noise with P(k) proportional to alpha^|k|, alpha = exp(-eps/sensitivity).

    Sampled as the difference of two geometric variables, which has exactly
    the two-sided geometric law.
    """
    if eps <= 0:
        raise MechanismError(f"two_sided_geometric eps must be positive, got {eps}")
    if sensitivity < 1:
        raise MechanismError("sensitivity must be a positive integer")
    alpha = math.exp(-eps / sensitivity)
    p = -math.expm1(-eps / sensitivity)  # 1 - alpha, computed stably
    g1 = rng.gen.geometric(p, size=size)
    g2 = rng.gen.geometric(p, size=size)
    return g1 - g2


def exponential_mechanism(scores, sensitivity: float, eps: float, rng: RandomStream) -> int:
    """Sample an index with P(i) proportional to exp(eps * score_i / (2 * sensitivity)).

    Max-score subtraction keeps the exponentials finite for any eps; eps = 0
    degenerates to a uniform choice.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise MechanismError("exponential mechanism needs a non-empty score list")
    if sensitivity <= 0:
        raise MechanismError("sensitivity must be positive")
    if eps < 0:
        raise MechanismError("eps must be non-negative")
    logits = eps * scores / (2.0 * sensitivity)
    logits = logits - logits.max()
    weights = np.exp(logits)
    probs = weights / weights.sum()
    u = rng.gen.uniform()
    return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, scores.size - 1))


def rho_for_eps_delta(eps: float, delta: float) -> float:
    """Largest rho such that rho-zCDP implies (eps, delta)-DP.

    Inverts eps = rho + 2*sqrt(rho*ln(1/delta)) in closed form.
    """
    if eps <= 0:
        raise MechanismError(f"eps must be positive, got {eps}")
    if not 0 < delta < 1:
        raise MechanismError(f"delta must lie in (0, 1), got {delta}")
    log_inv = math.log(1.0 / delta)
    return (math.sqrt(log_inv + eps) - math.sqrt(log_inv)) ** 2


def eps_for_rho(rho: float, delta: float) -> float:
    """Epsilon guaranteed by rho-zCDP at the given delta."""
    if rho < 0:
        raise MechanismError("rho must be non-negative")
    if not 0 < delta < 1:
        raise MechanismError(f"delta must lie in (0, 1), got {delta}")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def sigma_for_rho(rho: float, l2_sensitivity: float, num_measurements: int) -> float:
    """Gaussian scale so num_measurements sensitivity-s measurements cost rho total."""
    if rho <= 0:
        raise MechanismError("rho must be positive")
    if l2_sensitivity <= 0:
        raise MechanismError("l2 sensitivity must be positive")
    if num_measurements < 1:
        raise MechanismError("need at least one measurement")
    return l2_sensitivity * math.sqrt(num_measurements / (2.0 * rho))


def gaussian_sigma_for(
    eps: float, delta: float, l2_sensitivity: float, num_measurements: int
) -> float:
    """Gaussian sigma making num_measurements measurements (eps, delta)-DP overall."""
    rho = rho_for_eps_delta(eps, delta)
    sigma = sigma_for_rho(rho, l2_sensitivity, num_measurements)
    if not (sigma > 0 and math.isfinite(sigma)):
        raise MechanismError(
            f"no positive sigma satisfies eps={eps}, delta={delta}, "
            f"sensitivity={l2_sensitivity}, T={num_measurements}"
        )
    return sigma
