"""End-to-end delivery probability over k link-disjoint paths."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..topology import LinkKind, Path, Topology, k_disjoint_paths


@dataclass(frozen=True)
class ReliabilityEstimate:
    analytic: float
    monte_carlo: float
    sigma: float
    trials: int
    paths: tuple[Path, ...]

    @property
    def z(self) -> float:
        """Monte Carlo deviation in units of sigma (0 when sigma is 0 and they agree)."""
        diff = abs(self.monte_carlo - self.analytic)
        if self.sigma == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / self.sigma


def analytic_success(topology: Topology, paths: list[Path] | tuple[Path, ...]) -> float:
    """1 - prod_i (1 - prod_{l in path_i} (1 - loss_l))."""
    fail_all = 1.0
    for path in paths:
        ok = 1.0
        for key in path.links:
            ok *= 1.0 - _loss(topology, key)
        fail_all *= 1.0 - ok
    return 1.0 - fail_all


def _loss(topology: Topology, key) -> float:
    a, b, _ = key
    return next(l.loss_prob for l in topology.links_between(a, b) if l.key == key)


def reliability_estimate(topology: Topology, src: int, dst: int, k: int, *, trials: int = 100_000,
                         seed: int = 0, interface: LinkKind | None = None) -> ReliabilityEstimate:
    """Analytic success probability with a seeded Monte Carlo cross-check.

    Each trial draws every link of every path once; a trial succeeds when
    some path has all of its links up. Sigma is the binomial standard error
    of a ``trials``-sample mean around the analytic value.
    """
    paths = tuple(k_disjoint_paths(topology, src, dst, k, interface=interface))
    if not paths:
        return ReliabilityEstimate(0.0, 0.0, 0.0, trials, ())
    p = analytic_success(topology, paths)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), src, dst, k])))
    keys = sorted({key for path in paths for key in path.links},
                  key=lambda kk: (kk[0], kk[1], kk[2].value))
    index = {key: i for i, key in enumerate(keys)}
    loss = np.array([_loss(topology, key) for key in keys])
    successes = 0
    chunk = 20_000
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        up = rng.random((n, len(keys))) >= loss
        any_path = np.zeros(n, dtype=bool)
        for path in paths:
            cols = [index[key] for key in path.links]
            any_path |= up[:, cols].all(axis=1)
        successes += int(any_path.sum())
        done += n
    sigma = math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return ReliabilityEstimate(p, successes / trials, sigma, trials, paths)
