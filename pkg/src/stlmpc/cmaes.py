"""(mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation.

Maximizes fitness through an ask/tell interface. Parameter settings and update
equations follow Hansen's CMA-ES tutorial; the covariance matrix is
re-decomposed every generation since search dimensions here stay small.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SIGMA_MIN = 1e-12
SIGMA_MAX = 1e6


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


@dataclass
class CmaEs:
    """Optimizer state. Create with :meth:`CmaEs.init`, not directly."""

    dim: int
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    popsize: int
    mu: int
    weights: np.ndarray
    rng: np.random.Generator
    generation: int = 0
    best_x: np.ndarray | None = None
    best_f: float = -math.inf
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    # derived constants
    mu_eff: float = 0.0
    c_sigma: float = 0.0
    d_sigma: float = 0.0
    c_c: float = 0.0
    c_1: float = 0.0
    c_mu: float = 0.0
    chi_n: float = 0.0
    _sqrt_c: np.ndarray | None = field(default=None, repr=False)
    _inv_sqrt_c: np.ndarray | None = field(default=None, repr=False)
    _pending: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def init(cls, dim: int, mean0, sigma0: float, popsize: int | None = None,
             seed: int | np.random.Generator | None = None) -> "CmaEs":
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        mean0 = np.array(mean0, dtype=float).reshape(-1)
        if mean0.shape != (dim,):
            raise ValueError(f"mean0 has length {mean0.size}, expected {dim}")
        if not sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {sigma0}")
        lam = default_popsize(dim) if popsize is None else int(popsize)
        if lam < 2:
            raise ValueError(f"population size must be >= 2, got {lam}")
        mu = lam // 2
        w = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
        w = w / w.sum()
        mu_eff = 1.0 / float(np.sum(w ** 2))
        n = dim
        c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
        d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
        c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
        c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
        c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
        chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        es = cls(dim=n, mean=mean0, sigma=float(sigma0), cov=np.eye(n),
                 p_sigma=np.zeros(n), p_c=np.zeros(n), popsize=lam, mu=mu,
                 weights=w, rng=rng, mu_eff=mu_eff, c_sigma=c_sigma,
                 d_sigma=d_sigma, c_c=c_c, c_1=c_1, c_mu=c_mu, chi_n=chi_n)
        es._decompose()
        return es

    def _decompose(self) -> None:
        c = (self.cov + self.cov.T) / 2
        try:
            evals, evecs = np.linalg.eigh(c)
            if not np.all(np.isfinite(evals)):
                raise np.linalg.LinAlgError("non-finite eigenvalues")
        except np.linalg.LinAlgError as exc:
            log.warning("covariance factorization failed (%s); resetting C to I", exc)
            c = np.eye(self.dim)
            evals, evecs = np.ones(self.dim), np.eye(self.dim)
        floor = 1e-14 * max(float(np.sum(evals)), 0.0) / self.dim
        floor = max(floor, 1e-300)
        if np.any(evals < floor):
            evals = np.maximum(evals, floor)
            c = (evecs * evals) @ evecs.T
            c = (c + c.T) / 2
        self.cov = c
        d = np.sqrt(evals)
        self._sqrt_c = (evecs * d) @ evecs.T
        self._inv_sqrt_c = (evecs / d) @ evecs.T

    def ask(self) -> np.ndarray:
        """Sample ``popsize`` candidates ``m + sigma * C^(1/2) z`` as rows."""
        z = self.rng.standard_normal((self.popsize, self.dim))
        x = self.mean + self.sigma * (z @ self._sqrt_c.T)
        self._pending = x
        return x.copy()

    def tell(self, candidates, fitnesses) -> None:
        """Update the search distribution from fitnesses (higher is better)."""
        x = np.asarray(candidates, dtype=float)
        f = np.asarray(fitnesses, dtype=float).reshape(-1)
        if x.shape != (self.popsize, self.dim) or f.shape != (self.popsize,):
            raise ValueError(f"expected {self.popsize} candidates of dim {self.dim} "
                             f"and {self.popsize} fitnesses, got {x.shape} and {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("fitnesses must be finite")
        # descending fitness; the stable sort breaks ties by candidate index
        order = np.argsort(-f, kind="stable")
        if f[order[0]] > self.best_f:
            self.best_f = float(f[order[0]])
            self.best_x = x[order[0]].copy()

        n = self.dim
        y = (x[order[:self.mu]] - self.mean) / self.sigma
        y_w = self.weights @ y
        self.mean = self.mean + self.sigma * y_w
        self.generation += 1

        cs, cc, c1, cmu = self.c_sigma, self.c_c, self.c_1, self.c_mu
        self.p_sigma = ((1 - cs) * self.p_sigma
                        + math.sqrt(cs * (2 - cs) * self.mu_eff) * (self._inv_sqrt_c @ y_w))
        ps_norm = float(np.linalg.norm(self.p_sigma))
        h_sigma = (ps_norm / math.sqrt(1 - (1 - cs) ** (2 * self.generation))
                   < (1.4 + 2 / (n + 1)) * self.chi_n)
        self.p_c = (1 - cc) * self.p_c
        if h_sigma:
            self.p_c += math.sqrt(cc * (2 - cc) * self.mu_eff) * y_w
        delta_h = (1 - h_sigma) * cc * (2 - cc)
        rank_mu = (y.T * self.weights) @ y
        self.cov = ((1 - c1 - cmu) * self.cov
                    + c1 * (np.outer(self.p_c, self.p_c) + delta_h * self.cov)
                    + cmu * rank_mu)
        self.sigma *= math.exp((cs / self.d_sigma) * (ps_norm / self.chi_n - 1))
        self.sigma = min(max(self.sigma, SIGMA_MIN), SIGMA_MAX)
        self._decompose()
        self.history.append((self.generation, self.best_f, float(np.median(f)), self.sigma))

    def best(self) -> tuple[np.ndarray, float]:
        """Best candidate seen so far and its fitness."""
        if self.best_x is None:
            raise RuntimeError("best() called before any tell()")
        return self.best_x.copy(), self.best_f


def maximize(fitness, mean0, sigma0: float, generations: int, popsize: int | None = None,
             seed=None) -> CmaEs:
    """Run ``generations`` ask/tell rounds on a vectorized fitness function.

    ``fitness`` receives the ``(popsize, dim)`` candidate array and returns one
    value per row.
    """
    es = CmaEs.init(len(np.atleast_1d(mean0)), mean0, sigma0, popsize, seed)
    for _ in range(generations):
        x = es.ask()
        es.tell(x, fitness(x))
    return es
