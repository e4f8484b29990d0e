"""Monte Carlo sampler and box-counting estimator."""

from __future__ import annotations

import os

import numpy as np
import pytest

import lqspec as lq
from lqspec.empirical import cloud_to_csv, fit_to_csv


def _strong_r_gifs():
    return lq.build_example(lq.canonical_params("strong-r"))


# -- sampling ----------------------------------------------------------------

def test_single_self_loop_one_step():
    m = lq.Similitude(1, 0.5, np.eye(1), np.zeros(1))
    g = lq.Gifs(1, 1, (lq.Edge("a", 0, 0, m, 1.0),), anchor=(0.5,), bbox=((0.0, 1.0),))
    cloud = lq.sample(g, 100, seed=0, depth_eps=0.5)
    # ratio reaches the threshold after one application: every point is S(0.5)
    assert np.allclose(cloud.points, 0.25)


def test_empty_cloud():
    cloud = lq.sample(_strong_r_gifs(), 0, seed=0)
    assert len(cloud) == 0


def test_sampling_deterministic():
    g = _strong_r_gifs()
    a = lq.sample(g, 10_000, seed=42)
    b = lq.sample(g, 10_000, seed=42)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.source_vertex, b.source_vertex)
    c = lq.sample(g, 10_000, seed=43)
    assert not np.array_equal(a.points, c.points)


def test_sampling_thread_invariant():
    g = _strong_r_gifs()
    # force several chunks so scheduling could matter
    n = 3 * 65536 + 17
    serial = lq.sample(g, n, seed=7)
    os.environ["LQSPEC_THREADS"] = "4"
    try:
        threaded = lq.sample(g, n, seed=7)
    finally:
        del os.environ["LQSPEC_THREADS"]
    assert np.array_equal(serial.points, threaded.points)


def test_points_within_bbox():
    for fid in lq.FAMILY_IDS:
        g = lq.build_example(lq.canonical_params(fid))
        cloud = lq.sample(g, 2000, seed=5)
        eps = cloud.depth_eps
        for d, (lo, hi) in enumerate(g.bbox):
            assert cloud.points[:, d].min() >= lo - eps
            assert cloud.points[:, d].max() <= hi + eps


def test_sample_means_match_fixed_point():
    # the vertex measures' means solve m_i = sum_e p_e (rho_e R_e m_j + b_e);
    # a biased walk scheme (e.g. double-stepping on vertex changes) breaks
    # this at many sigma
    for fid in ("strong-r2", "strong-r", "nonstrong-r2"):
        g = lq.build_example(lq.canonical_params(fid))
        d = g.dim
        n = g.num_vertices * d
        A = np.zeros((n, n))
        b = np.zeros(n)
        for e in g.edges:
            i, j = e.src, e.dst
            A[d * i : d * i + d, d * j : d * j + d] += e.prob * e.map.ratio * e.map.orthogonal
            b[d * i : d * i + d] += e.prob * e.map.translation
        exact = np.linalg.solve(np.eye(n) - A, b)
        cloud = lq.sample(g, 200_000, seed=11)
        for v in range(g.num_vertices):
            got = cloud.points[cloud.source_vertex == v].mean(axis=0)
            assert np.max(np.abs(got - exact[d * v : d * v + d])) < 5e-3


def test_source_vertices_balanced():
    g = _strong_r_gifs()
    cloud = lq.sample(g, 500, seed=1)
    counts = np.bincount(cloud.source_vertex, minlength=2)
    assert tuple(counts) == (500, 500)


# -- partition sums ----------------------------------------------------------

def test_partition_q1_mass_exact():
    cloud = lq.sample(_strong_r_gifs(), 5000, seed=3)
    for h in (0.25, 0.03, 0.004):
        assert lq.partition_sum(cloud, h, 1.0) == 2.0


def test_partition_q0_counts_boxes():
    cloud = lq.sample(_strong_r_gifs(), 5000, seed=3)
    s0 = lq.partition_sum(cloud, 0.125, 0.0)
    assert s0 == int(s0)
    assert 1 <= s0 <= 16


def test_partition_single_box():
    pts = np.full((50, 1), 0.3)
    cloud = lq.SampleCloud(
        points=pts,
        source_vertex=np.zeros(50, dtype=int),
        n_per_vertex=50,
        seed=0,
        depth_eps=1e-9,
        bbox=((0.0, 1.0),),
        grid_anchor=(0.0,),
    )
    assert lq.partition_sum(cloud, 1.0, 2.0, total_mass=2.0) == pytest.approx(4.0)


def test_partition_normalized_nonincreasing_in_q():
    cloud = lq.sample(_strong_r_gifs(), 20000, seed=9)
    for h in (0.06, 0.01):
        vals = [
            lq.partition_sum(cloud, h, q, total_mass=1.0) for q in (0.0, 0.5, 1.0, 2.0, 4.0)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


# -- estimator -----------------------------------------------------------------

def test_estimate_insufficient_scales():
    g = _strong_r_gifs()
    with pytest.raises(lq.InsufficientScales):
        lq.estimate_tau(g, 1.0, [0.1, 0.05], 100, seed=0)
    with pytest.raises(lq.InsufficientScales):
        lq.estimate_tau(g, 1.0, [0.1, 0.09, 0.08], 100, seed=0)


def test_estimate_slope_zero_at_q1():
    g = _strong_r_gifs()
    fit = lq.estimate_tau(g, 1.0, [2.0**-k for k in range(4, 10)], 20_000, seed=11)
    assert abs(fit.slope) <= 0.02


def test_estimate_reuses_cloud():
    g = _strong_r_gifs()
    cloud = lq.sample(g, 50_000, seed=21)
    scales = [2.0**-k for k in range(4, 10)]
    f1 = lq.estimate_tau(g, 2.0, scales, 50_000, seed=21, cloud=cloud)
    f2 = lq.estimate_tau(g, 2.0, scales, 50_000, seed=21)
    assert f1.slope == f2.slope


def test_estimate_tracks_solver_smoke():
    # small-N smoke check; the tight tolerance run lives in the acceptance suite
    p = lq.canonical_params("strong-r")
    g = lq.build_example(p)
    spec = lq.build_matrix_spec(p)
    fit = lq.estimate_tau(g, 2.0, [2.0**-k for k in range(4, 11)], 100_000, seed=42)
    alpha, _ = lq.tau(spec, 2.0, with_lattice=False)
    assert abs(fit.slope - alpha) <= 0.1


# -- exports ---------------------------------------------------------------------

def test_cloud_csv_format():
    cloud = lq.sample(_strong_r_gifs(), 5, seed=2)
    text = cloud_to_csv(cloud)
    lines = text.strip().split("\n")
    assert lines[0] == "x,vertex"
    assert len(lines) == 1 + len(cloud)
    x, v = lines[1].rsplit(",", 1)
    assert float(x) == cloud.points[0, 0]
    assert int(v) == cloud.source_vertex[0]


def test_fit_csv_roundtrip():
    g = _strong_r_gifs()
    fit = lq.estimate_tau(g, 0.5, [2.0**-k for k in range(4, 9)], 5000, seed=4)
    lines = fit_to_csv(fit).strip().split("\n")
    assert lines[0] == "h,S_q"
    for line, h, s in zip(lines[1:], fit.scales, fit.sums):
        sh, ss = line.split(",")
        assert float(sh) == h
        assert float(ss) == s
