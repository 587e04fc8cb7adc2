"""Cost accounting in normalized high-fidelity units.

A high-fidelity gradient costs exactly 1, a low-fidelity one exactly gamma.
The ledger stores integer call counters and forms the cumulative cost as
``high + gamma * low`` in a single multiply-add, so closed-form predictions
below match the ledger bit for bit.
"""

from dataclasses import dataclass

from .errors import DomainFault


@dataclass
class CostLedger:
    gamma: float
    high_calls: int = 0
    low_calls: int = 0

    def add_high(self, n=1):
        self.high_calls += n

    def add_low(self, n=1):
        self.low_calls += n

    @property
    def cumulative(self):
        return self.high_calls + self.gamma * self.low_calls


def cost_bfsag(n_it, n_h, n_l, gamma):
    """Total cost of n_it bi-fidelity SAG iterations: n_it * (n_h + gamma n_l)."""
    if min(n_it, n_h, n_l) < 0 or gamma < 0:
        raise DomainFault("counts and gamma must be non-negative")
    return n_it * n_h + gamma * (n_it * n_l)


def cost_bfsvrg(n_oit, n_l, m, n_h, gamma):
    """Total bi-fidelity SVRG cost: n_oit * (gamma n_l + (gamma + 1) m n_h)."""
    if min(n_oit, n_l, m, n_h) < 0 or gamma < 0:
        raise DomainFault("counts and gamma must be non-negative")
    return n_oit * m * n_h + gamma * (n_oit * n_l + n_oit * m * n_h)


def cost_ratio_sag(n_h, n_l, gamma, n_h_prime):
    """Per-iteration cost of bi-fidelity SAG relative to plain SAG."""
    if n_h_prime <= 0:
        raise DomainFault("reference batch size must be positive")
    return (n_h + gamma * n_l) / n_h_prime


def cost_ratio_svrg(n_l, m, n_h, gamma, n_h_prime, n_h_dblprime):
    """Per-outer-iteration cost of bi-fidelity SVRG relative to plain SVRG."""
    denom = n_h_prime + 2 * n_h_dblprime * m
    if denom <= 0:
        raise DomainFault("reference cost must be positive")
    return (gamma * n_l + (gamma + 1) * m * n_h) / denom
