"""MAP fitting with L-BFGS and a k-fold cross-validation harness."""

from __future__ import annotations

import logging
import math
import time
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import line_search

from .expfam import (
    DEFAULT_OVERSAMPLE,
    NaturalParams,
    SufficientStats,
    group_sums,
    log_partition,
    objective,
    plancherel_precision,
)
from .special_functions import Manifold, as_coords, num_coeffs

log = logging.getLogger(__name__)

REG_SCHEMES = ("none", "plancherel")


@dataclass(frozen=True)
class FitConfig:
    L: int
    oversample: float = DEFAULT_OVERSAMPLE
    alpha_reg: float = 0.0
    reg_scheme: str = "none"
    max_iter: int = 500
    gtol: float = 1e-5
    history: int = 10
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("bandlimit must be at least 1")
        if self.oversample < 1:
            raise ValueError("oversampling factor must be >= 1")
        if self.alpha_reg < 0:
            raise ValueError("regularization strength must be >= 0")
        if self.reg_scheme not in REG_SCHEMES:
            raise ValueError(f"unknown regularization scheme {self.reg_scheme!r}")
        if not self.gtol > 0:
            raise ValueError("gradient tolerance must be positive")
        if self.history < 1:
            raise ValueError("history size must be >= 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")

    def precision(self, manifold) -> np.ndarray | None:
        if self.reg_scheme == "none" or self.alpha_reg == 0:
            return None
        return plancherel_precision(manifold, self.L, self.alpha_reg)


@dataclass
class FitResult:
    eta: NaturalParams
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    message: str = ""
    seconds: float = 0.0


class _Evaluator:
    """Shares one moment computation between value and gradient requests."""

    def __init__(self, manifold, stats, cfg, reg):
        self.manifold, self.stats, self.cfg, self.reg = manifold, stats, cfg, reg
        self._key = None
        self._val = None
        self.calls = 0

    def __call__(self, x):
        key = x.tobytes()
        if key != self._key:
            eta = NaturalParams(self.manifold, self.cfg.L, x)
            f, g = objective(eta, self.stats, self.cfg.oversample, self.reg)
            if not math.isfinite(f) or not np.all(np.isfinite(g)):
                raise FloatingPointError("objective is not finite")
            self._key, self._val = key, (f, g)
            self.calls += 1
        return self._val

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def _two_loop(g, memory):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def fit_map(stats: SufficientStats, cfg: FitConfig, init=None) -> FitResult:
    """Minimize -loglik + 0.5 sum(beta * eta^2) from eta = 0 (or ``init``)."""
    if stats.L != cfg.L:
        raise ValueError(f"statistics bandlimit {stats.L} differs from config bandlimit {cfg.L}")
    manifold = stats.manifold
    reg = cfg.precision(manifold)
    ev = _Evaluator(manifold, stats, cfg, reg)
    x = np.zeros(num_coeffs(manifold, cfg.L) - 1) if init is None else np.array(init, dtype=float)
    t0 = time.perf_counter()
    f, g = ev(x)
    trace = [f]
    memory: deque = deque(maxlen=cfg.history)
    converged = False
    message = "iteration limit reached"
    it = 0
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= cfg.gtol:
            converged, message = True, "gradient tolerance reached"
            break
        if it >= cfg.max_iter:
            break
        p = _two_loop(g, memory)
        if not g @ p < 0:
            memory.clear()
            p = -g
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="The line search algorithm")
            step, *_ = line_search(ev.f, ev.g, x, p, gfk=g, old_fval=f, c1=cfg.c1, c2=cfg.c2, maxiter=30)
            if step is None and memory:
                memory.clear()
                p = -g
                step, *_ = line_search(ev.f, ev.g, x, p, gfk=g, old_fval=f, c1=cfg.c1, c2=cfg.c2, maxiter=30)
        if step is None:
            message = "line search failed to satisfy the Wolfe conditions"
            log.warning("%s at iteration %d (|g|=%.3g)", message, it, gnorm)
            break
        x_new = x + step * p
        f_new, g_new = ev(x_new)
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.sqrt((s @ s) * (y @ y))):
            memory.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        it += 1
    seconds = time.perf_counter() - t0
    return FitResult(
        eta=NaturalParams(manifold, cfg.L, x),
        objective=f,
        grad_norm=float(np.max(np.abs(g))) if g.size else 0.0,
        iterations=it,
        converged=converged,
        trace=trace,
        message=message,
        seconds=seconds,
    )


# ---------------------------------------------------------------------------
# Cross-validation


def fold_labels(n: int, k: int, seed: int) -> np.ndarray:
    """Seeded uniform shuffle cut into k contiguous blocks."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise ValueError(f"{n} points cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    for fold, idx in enumerate(np.array_split(order, k)):
        labels[idx] = fold
    return labels


@dataclass
class CVRecord:
    L: int
    alpha_reg: float
    fold: int
    train_ll: float
    test_ll: float
    seconds: float
    iterations: int
    converged: bool


@dataclass
class CVReport:
    records: list[CVRecord]

    def summary(self) -> list[dict]:
        """Mean and standard deviation per (L, alpha_reg)."""
        keys = sorted({(r.L, r.alpha_reg) for r in self.records})
        out = []
        for L, a in keys:
            rs = [r for r in self.records if r.L == L and r.alpha_reg == a]
            tr = np.array([r.train_ll for r in rs])
            te = np.array([r.test_ll for r in rs])
            out.append(
                dict(
                    L=L,
                    alpha_reg=a,
                    train_mean=float(tr.mean()),
                    train_std=float(tr.std()),
                    test_mean=float(te.mean()),
                    test_std=float(te.std()),
                    seconds=float(np.mean([r.seconds for r in rs])),
                )
            )
        return out

    def best(self) -> dict:
        return max(self.summary(), key=lambda s: s["test_mean"])


def cross_validate(manifold, points, folds: int, Ls, alpha_regs, template: FitConfig | None = None, seed: int = 0) -> CVReport:
    """k-fold train/test mean log-likelihood for every (L, alpha_reg)."""
    manifold = Manifold.parse(manifold)
    c = as_coords(manifold, points)
    labels = fold_labels(c.shape[0], folds, seed)
    counts = np.bincount(labels, minlength=folds)
    if np.any(counts == 0):
        raise ValueError("a fold received no points")
    template = template or FitConfig(L=max(Ls), reg_scheme="plancherel")
    records = []
    for L in Ls:
        sums = group_sums(manifold, c, L, labels, folds)
        total = sums.sum(axis=0)
        for a in alpha_regs:
            scheme = "plancherel" if a > 0 else "none"
            cfg = replace(template, L=L, alpha_reg=float(a), reg_scheme=scheme)
            for k in range(folds):
                n_test = counts[k]
                n_train = c.shape[0] - n_test
                train = SufficientStats(manifold, L, n_train, (total - sums[k]) / n_train)
                test_mean = sums[k] / n_test
                res = fit_map(train, cfg)
                logZ = log_partition(res.eta, cfg.oversample)
                records.append(
                    CVRecord(
                        L=L,
                        alpha_reg=float(a),
                        fold=k,
                        train_ll=float(res.eta.eta @ train.mean) - logZ,
                        test_ll=float(res.eta.eta @ test_mean) - logZ,
                        seconds=res.seconds,
                        iterations=res.iterations,
                        converged=res.converged,
                    )
                )
                log.info("L=%d alpha=%g fold=%d test_ll=%.4f (%d it)", L, a, k, records[-1].test_ll, res.iterations)
    return CVReport(records)
