"""Shared fixtures: random valid parameters and independent brute-force
oracles used to cross-check the adaptive evaluation paths."""

from __future__ import annotations

import math

import numpy as np
import pytest

import lqspec as lq
from lqspec.gifs import FamilyParams

_GROUPS = {
    "strong-r": (["e1", "e2", "e3"], ["e4", "e5"]),
    "strong-r2": (["e1", "e2", "e3", "e4"], ["e5", "e6", "e7", "e8"]),
    "nonstrong-r-basic": (["e1", "e2", "e3"], ["e4", "e5"]),
    "nonstrong-r-heights": tuple(
        [[f"e{3 * i + 1}", f"e{3 * i + 2}", f"e{3 * i + 3}"] for i in range(5)]
        + [["e16", "e17"]]
    ),
    "nonstrong-r2": (["e1", "e2", "e3"], ["e4", "e5", "e6", "e7"]),
}


def random_params(family_id: str, rng: np.random.Generator) -> FamilyParams:
    """A random parameter set satisfying every validity constraint."""
    probs: dict[str, float] = {}
    for grp in _GROUPS[family_id]:
        w = rng.uniform(0.1, 1.0, len(grp))
        w /= w.sum()
        probs.update(zip(grp, w))
    if family_id == "strong-r2":
        return FamilyParams(family_id, probs=probs)
    rho = rng.uniform(0.08, 0.55)
    r_max = (1.0 - rho) / (2.0 - rho)
    r = rng.uniform(0.05, 0.95) * r_max
    extra = {}
    if family_id == "nonstrong-r2":
        t = rng.uniform(0.2, 0.8)
        extra = {"t": t, "s": rng.uniform(0.15, 0.85) * min(t, 1.0 - t)}
    return FamilyParams(family_id, rho=rho, r=r, probs=probs, **extra)


# ---------------------------------------------------------------------------
# Brute-force oracles (independent of the adaptive truncation engine and of
# the power iteration: explicit term sums, cumulative-sum weights, numpy
# eigenvalues, plain bisection)
# ---------------------------------------------------------------------------

_BRUTE_CACHE: dict = {}


def _brute_log_weights(fam, k_end: int) -> np.ndarray:
    """Explicit log-weights, cumulative-sum route for binomial weights."""
    w = fam.weight
    key = (w, fam.k_start, k_end)
    cached = _BRUTE_CACHE.get(key)
    if cached is not None:
        return cached
    ks = np.arange(fam.k_start, k_end + 1, dtype=float)
    if isinstance(w, lq.Constant):
        log_w = np.full(ks.shape, math.log(w.c))
    elif isinstance(w, lq.GeometricPower):
        log_w = math.log(w.c) + ks * math.log(w.a)
    else:
        hi, lo = max(w.a, w.b), min(w.a, w.b)
        kk = np.arange(0, k_end + 1, dtype=float)
        sgeo = np.cumsum((lo / hi) ** kk)
        log_w = (math.log(w.c) + kk * math.log(hi) + np.log(sgeo))[fam.k_start :]
    _BRUTE_CACHE[key] = log_w
    return log_w


def brute_family_value(fam, q: float, alpha: float, n_terms: int = 10**6) -> float:
    k0 = fam.k_start
    k_end = fam.k_end if fam.k_end is not None else k0 + n_terms - 1
    ks = np.arange(k0, k_end + 1, dtype=float)
    log_w = _brute_log_weights(fam, k_end)
    log_len = math.log(fam.base_ratio) + ks * math.log(fam.step_ratio)
    with np.errstate(under="ignore"):
        return float(np.sum(np.exp(q * log_w - alpha * log_len)))


def brute_matrix(spec, q: float, alpha, n_terms: int = 10**5) -> np.ndarray:
    out = np.zeros((spec.n, spec.n))
    row_alpha = spec.row_alpha(alpha)
    for i in range(spec.n):
        for j in range(spec.n):
            for fam in spec.entries[i][j].families:
                out[i, j] += brute_family_value(fam, q, row_alpha[i], n_terms)
    return out


def brute_class_root(spec, members, q: float) -> float:
    members = list(members)

    def radius(a: float) -> float:
        mat = brute_matrix(spec, q, a, 10**5)
        block = mat[np.ix_(members, members)]
        if not np.all(np.isfinite(block)):
            return np.inf
        return float(max(abs(np.linalg.eigvals(block))))

    hi = 0.0
    with np.errstate(over="ignore", under="ignore"):
        while radius(hi) < 1.0:
            hi += 0.25
        lo = hi - 0.25
        while radius(lo) > 1.0:
            lo -= 0.5
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if radius(mid) < 1.0:
                lo = mid
            else:
                hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="session")
def canonical_specs():
    return {fid: lq.build_matrix_spec(lq.canonical_params(fid)) for fid in lq.FAMILY_IDS}


@pytest.fixture(scope="session")
def canonical_closed_forms():
    return {fid: lq.build_closed_form(lq.canonical_params(fid)) for fid in lq.FAMILY_IDS}
