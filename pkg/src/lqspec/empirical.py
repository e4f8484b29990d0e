"""Monte Carlo cross-validation of the computed spectra.

Points are drawn from each vertex measure by random edge walks (a chaos
game on the graph): starting at a vertex, edges are drawn with their
transition probabilities and the corresponding similitudes composed until
the accumulated contraction ratio falls below a truncation threshold, at
which point the composed map is applied to a fixed anchor point.  Each
emitted point therefore lies within depth_eps of an exact draw.

Sampling is organized in fixed-size chunks of 65536 walks with one
deterministic random stream per (seed, vertex, chunk), so results are
bit-identical no matter how chunks are scheduled across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientScales
from .gifs import Gifs

CHUNK_SIZE = 65536


@dataclass(frozen=True)
class SampleCloud:
    points: np.ndarray  # (n, d)
    source_vertex: np.ndarray  # (n,) int
    n_per_vertex: int
    seed: int
    depth_eps: float
    bbox: tuple = ()
    grid_anchor: tuple = ()

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ScalingFit:
    q: float
    scales: tuple[float, ...]
    sums: tuple[float, ...]
    slope: float
    intercept: float
    stderr: float
    metadata: dict = field(default_factory=dict, compare=False)


def _num_threads() -> int:
    raw = os.environ.get("LQSPEC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sample(g: Gifs, n_per_vertex: int, seed: int, depth_eps: float = 1e-9) -> SampleCloud:
    """Draw n_per_vertex points from each vertex measure."""
    if n_per_vertex < 0:
        raise ValueError("n_per_vertex must be >= 0")
    anchor = np.asarray(g.anchor, dtype=float)
    # Per-vertex edge tables.
    tables = []
    for v in range(g.num_vertices):
        out = g.out_edges(v)
        cum = np.cumsum([e.prob for e in out])
        cum[-1] = 1.0  # guard against fsum slack
        ratios = np.array([e.map.ratio for e in out])
        orths = np.stack([e.map.orthogonal for e in out])
        trans = np.stack([e.map.translation for e in out])
        dsts = np.array([e.dst for e in out], dtype=np.int64)
        tables.append((cum, ratios, orths, trans, dsts))

    jobs = []
    for v in range(g.num_vertices):
        n_chunks = (n_per_vertex + CHUNK_SIZE - 1) // CHUNK_SIZE
        for c in range(n_chunks):
            count = min(CHUNK_SIZE, n_per_vertex - c * CHUNK_SIZE)
            jobs.append((v, c, count))

    def run_chunk(job):
        v, c, count = job
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(v, c)))
        return v, c, _walk_chunk(g.dim, tables, v, count, rng, depth_eps, anchor)

    threads = _num_threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_chunk, jobs))
    else:
        results = [run_chunk(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))

    if results:
        points = np.concatenate([r[2] for r in results], axis=0)
        vertices = np.concatenate(
            [np.full(len(r[2]), r[0], dtype=np.int64) for r in results]
        )
    else:
        points = np.zeros((0, g.dim))
        vertices = np.zeros(0, dtype=np.int64)
    return SampleCloud(
        points=points,
        source_vertex=vertices,
        n_per_vertex=n_per_vertex,
        seed=seed,
        depth_eps=depth_eps,
        bbox=g.bbox,
        grid_anchor=tuple(lo for lo, _ in g.bbox),
    )


def _walk_chunk(dim, tables, start_vertex, count, rng, depth_eps, anchor):
    """Vectorized walks: all walks in the chunk advance one edge per sweep."""
    vert = np.full(count, start_vertex, dtype=np.int64)
    scale = np.ones(count)
    trans = np.zeros((count, dim))
    orth = np.broadcast_to(np.eye(dim), (count, dim, dim)).copy()
    active = np.ones(count, dtype=bool)

    while np.any(active):
        idx = np.nonzero(active)[0]
        u = rng.random(len(idx))
        # Group by a snapshot of the current vertices so every walk advances
        # exactly one edge per sweep even when it changes vertex.
        vsnap = vert[idx]
        for v in np.unique(vsnap):
            cum, ratios, orths, transl, dsts = tables[v]
            mask = vsnap == v
            sel = idx[mask]
            choice = np.searchsorted(cum, u[mask], side="right")
            choice = np.minimum(choice, len(cum) - 1)
            for e in range(len(cum)):
                rows = sel[choice == e]
                if rows.size == 0:
                    continue
                step_t = orth[rows] @ transl[e]
                trans[rows] += scale[rows, None] * step_t
                orth[rows] = orth[rows] @ orths[e]
                scale[rows] *= ratios[e]
                vert[rows] = dsts[e]
        active &= scale > depth_eps

    pts = trans + scale[:, None] * (orth @ anchor)
    return pts


def partition_sum(cloud: SampleCloud, h: float, q: float, total_mass: float | None = None) -> float:
    """Sum of q-th powers of empirical box masses on a grid of side h.

    Boxes are anchored at the family bounding-box corner (no random
    offsets); the empirical mass of a box is total_mass * count / N.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    n = len(cloud)
    if n == 0:
        return 0.0
    if total_mass is None:
        total_mass = float(len(np.unique(cloud.source_vertex)))
    anchor = np.asarray(cloud.grid_anchor, dtype=float)
    keys = np.floor((cloud.points - anchor) / h).astype(np.int64)
    if keys.shape[1] == 1:
        flat = keys[:, 0]
    else:
        # Collapse the integer coordinates into one key; offsets keep them
        # nonnegative so the packing is collision-free.
        mins = keys.min(axis=0)
        shifted = keys - mins
        flat = shifted[:, 0]
        for d in range(1, shifted.shape[1]):
            flat = flat * (int(shifted[:, d].max()) + 1) + shifted[:, d]
    _, counts = np.unique(flat, return_counts=True)
    # total_mass^q * sum (c/n)^q, arranged so q=1 returns total_mass exactly
    # (integer counts sum to n without rounding).
    return float(total_mass**q * np.sum(counts.astype(float) ** q) / float(n) ** q)


def estimate_tau(
    g: Gifs,
    q: float,
    h_list,
    n_per_vertex: int,
    seed: int,
    depth_eps: float = 1e-9,
    cloud: SampleCloud | None = None,
) -> ScalingFit:
    """Log-log regression of partition sums against scale.

    Requires at least three scales spanning at least two octaves, all below
    the family's coarsest first-level cell so the grid actually resolves
    structure.
    """
    hs = sorted((float(h) for h in h_list), reverse=True)
    if len(hs) < 3:
        raise InsufficientScales(f"need >= 3 scales, got {len(hs)}")
    if hs[0] / hs[-1] < 4.0:
        raise InsufficientScales("scales must span at least two octaves")
    min_cell = min(e.map.ratio for e in g.edges)
    if hs[0] > min_cell:
        raise InsufficientScales(
            f"coarsest scale {hs[0]} exceeds the smallest first-level cell {min_cell}"
        )
    if cloud is None:
        cloud = sample(g, n_per_vertex, seed, depth_eps=depth_eps)
    total_mass = float(g.num_vertices)
    sums = [partition_sum(cloud, h, q, total_mass=total_mass) for h in hs]
    if any(s <= 0.0 for s in sums):
        raise InsufficientScales("empty partition sum; increase samples")

    x = np.log(hs)
    y = np.log(sums)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(hs) - 2
    sse = float(np.sum(resid**2))
    sxx = float(np.sum((x - np.mean(x)) ** 2))
    stderr = math.sqrt(sse / dof / sxx) if dof > 0 else 0.0
    return ScalingFit(
        q=q,
        scales=tuple(hs),
        sums=tuple(sums),
        slope=float(slope),
        intercept=float(intercept),
        stderr=stderr,
        metadata={"n_per_vertex": n_per_vertex, "seed": seed, "depth_eps": depth_eps},
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def cloud_to_csv(cloud: SampleCloud) -> str:
    dim = cloud.points.shape[1] if len(cloud) else len(cloud.grid_anchor)
    header = ",".join(["x", "y", "z"][:dim] + ["vertex"])
    lines = [header]
    for row, v in zip(cloud.points, cloud.source_vertex):
        lines.append(",".join(format(c, ".17g") for c in row) + f",{int(v)}")
    return "\n".join(lines) + "\n"


def fit_to_csv(fit: ScalingFit) -> str:
    lines = ["h,S_q"]
    for h, s in zip(fit.scales, fit.sums):
        lines.append(f"{format(h, '.17g')},{format(s, '.17g')}")
    return "\n".join(lines) + "\n"
