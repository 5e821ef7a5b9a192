import numpy as np
import pytest
import scipy.sparse as sp

from wittenlab.branches import (LABEL_LARGE, LABEL_VS, LABEL_ZERO,
                                _rebase_split_groups, classify, eig_sym,
                                eigenvalue_clusters, match_step,
                                track_branches)
from wittenlab.config import Tolerances
from wittenlab.derham import (LaplacianFamily, build_circle_complex,
                              laplacian_family)
from wittenlab.errors import (ConfigError, GapNotFoundError, NumericalError,
                              TrackingError, ZeroCountError)
from wittenlab.trigpoly import circle_sin2

import oracles


def test_eig_sym_matches_dense(rng):
    M = rng.standard_normal((12, 12))
    A = 0.5 * (M + M.T)
    w, V = eig_sym(A)
    wd = np.linalg.eigvalsh(A)
    assert np.max(np.abs(w - wd)) < 1e-10
    assert np.max(np.abs(A @ V - V * w)) < 1e-9


def test_eig_sym_k_slice(rng):
    M = rng.standard_normal((10, 10))
    A = 0.5 * (M + M.T)
    w, V = eig_sym(A, k=3)
    assert w.shape == (3,) and V.shape == (10, 3)
    assert np.max(np.abs(w - np.linalg.eigvalsh(A)[:3])) < 1e-10


def test_eig_sym_rejects_asymmetric(rng):
    A = rng.standard_normal((6, 6))
    with pytest.raises(NumericalError):
        eig_sym(A)


def test_eig_sym_sparse_needs_k():
    A = sp.eye(8, format="csr")
    with pytest.raises(ConfigError):
        eig_sym(A)


def test_eigenvalue_clusters_grouping():
    w = np.array([0.0, 1e-9, 1.0, 1.0 + 1e-8, 2.0])
    cl = eigenvalue_clusters(w, 1e-6)
    assert cl == [(0, 2), (2, 4), (4, 5)]


def synthetic_family(A0, A1, A2=None):
    n = A0.shape[0]
    return LaplacianFamily(A0=np.asarray(A0, float),
                           A1=np.asarray(A1, float),
                           A2=np.zeros((n, n)) if A2 is None else A2)


def test_tracking_follows_exact_crossing():
    """Two analytic branches cross; labels must follow the eigenvectors,
    not the sorted order."""
    th = 0.6
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    D0 = np.diag([0.0, 1.0])
    D1 = np.diag([1.0, -1.0])
    fam = synthetic_family(R @ D0 @ R.T, R @ D1 @ R.T)
    grid = np.linspace(0.0, 1.0, 9)
    brs = track_branches(None, 0, grid, k=2, tol=Tolerances(), family=fam)
    vals = sorted(b.value_at(1.0) for b in brs)
    assert vals == pytest.approx([0.0, 1.0], abs=1e-10)
    # each branch is affine in t: lambda_1 = t, lambda_2 = 1 - t
    for b in brs:
        got = np.array([b.value_at(t) for t in grid])
        lin0 = np.abs(got - grid).max()
        lin1 = np.abs(got - (1.0 - grid)).max()
        assert min(lin0, lin1) < 1e-10


def test_tracking_resolves_avoided_crossing():
    # gap scale well above the bisection floor so the rotation is
    # resolvable by refinement alone
    eps = 0.05
    A0 = np.array([[-1.0, eps], [eps, 1.0]])
    A1 = np.array([[1.0, 0.0], [0.0, -1.0]])
    fam = synthetic_family(A0, A1)
    grid = np.linspace(0.0, 2.0, 11)
    brs = track_branches(None, 0, grid, k=2, tol=Tolerances(), family=fam)
    for b in brs:
        for t in grid:
            lam = np.linalg.eigvalsh(fam.at(t))
            assert np.min(np.abs(lam - b.value_at(t))) < 1e-10
    # the two branches never cross: the gap stays >= 2 eps
    for t in grid:
        pair = sorted(b.value_at(t) for b in brs)
        assert pair[1] - pair[0] >= 2 * eps - 1e-12


def test_circle_branch_values_stay_in_spectrum(circle_cx8):
    grid = np.arange(0.0, 4.0 + 1e-9, 0.5)
    fam = laplacian_family(circle_cx8, 0)
    brs = track_branches(circle_cx8, 0, grid, k=5, tol=Tolerances())
    for t in grid:
        lam = np.linalg.eigvalsh(fam.at(t))
        for b in brs:
            assert np.min(np.abs(lam - b.value_at(t))) < 1e-10
    # the 5 smallest at t=4 are not the flat head: one of the lambda=1
    # modes has already overtaken the lambda=9 one by then
    vals0 = sorted(b.value_at(0.0) for b in brs)
    assert vals0 == pytest.approx([0, 1, 4, 4, 9], abs=1e-10)


def test_t0_slopes_match_finite_differences(circle_cx8):
    grid = np.arange(0.0, 2.0 + 1e-9, 0.25)
    fam = laplacian_family(circle_cx8, 0)
    brs = track_branches(circle_cx8, 0, grid, k=5, tol=Tolerances())
    vals0 = sorted(b.value_at(0.0) for b in brs)
    assert vals0 == pytest.approx([0, 1, 1, 4, 4], abs=1e-10)
    slopes = sorted(b.t0_slope for b in brs)
    fd = sorted(oracles.fd_branch_slopes(fam.at, 0.0, h=1e-6)[:5])
    assert np.max(np.abs(np.array(slopes) - np.array(fd))) < 1e-4


def test_grid_validation():
    fam = synthetic_family(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(TrackingError):
        track_branches(None, 0, [0.0], k=1, family=fam)
    with pytest.raises(TrackingError):
        track_branches(None, 0, [1.0, 2.0], k=1, family=fam)
    with pytest.raises(TrackingError):
        track_branches(None, 0, [0.0, 0.5, 0.4], k=1, family=fam)


def test_match_step_handles_cluster_rotation(rng):
    # two exactly degenerate eigenvalues: any rotated basis of the
    # eigenspace must be matched back onto the tracked frame
    w = np.array([1.0, 1.0, 3.0])
    prev = np.eye(3)[:, :2]
    th = 0.9
    Q = np.array([[np.cos(th), -np.sin(th), 0],
                  [np.sin(th), np.cos(th), 0],
                  [0, 0, 1.0]])
    cols, W, ov = match_step(prev, w, Q, 1e-6)
    assert np.min(ov) > 1 - 1e-12
    assert np.max(np.abs(W - prev)) < 1e-12


def test_rebase_recovers_mixed_pair():
    """A tracked pair straddling two sub-clusters is purified once the
    splitting resolves; the group certificate validates the span."""
    w = np.array([1.0, 1.0 + 1e-7, 1.0 + 4e-5, 1.0 + 4e-5 + 1e-7, 9.0])
    V = np.eye(5)
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    prev = np.zeros((5, 2))
    prev[:, 0] = [c, 0, s, 0, 0]
    prev[:, 1] = [0, c, 0, s, 0]
    tol = Tolerances()
    cols, W, ov = match_step(prev, w, V, tol.cluster_rel)
    assert float(np.min(ov)) < tol.overlap_min  # mixed: cannot continue
    out = _rebase_split_groups(prev, w, V, cols, W, ov, tol)
    assert out is not None
    cols2, W2, ov2 = out
    assert float(np.min(ov2)) >= tol.overlap_min
    for j in range(2):
        v = W2[:, j]
        lo = np.linalg.norm(v[:2])
        hi = np.linalg.norm(v[2:4])
        # purified: the vector lives in exactly one sub-cluster
        assert min(lo, hi) < 1e-10 and max(lo, hi) > 1 - 1e-10


def test_rebase_refuses_wide_value_bands():
    w = np.array([1.0, 2.0, 9.0])
    V = np.eye(3)
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    prev = np.array([[c], [s], [0.0]])
    tol = Tolerances()
    cols, W, ov = match_step(prev, w, V, tol.cluster_rel)
    assert float(np.min(ov)) < tol.overlap_min
    assert _rebase_split_groups(prev, w, V, cols, W, ov, tol) is None


@pytest.fixture(scope="module")
def circle16_branches():
    cx = build_circle_complex(16, circle_sin2())
    grid = np.arange(0.0, 6.0 + 1e-9, 0.5)
    return track_branches(cx, 0, grid, k=6, tol=Tolerances())


def test_classify_circle_labels(circle16_branches):
    deg = classify(circle16_branches, 1, 2, 6.0,
                   tol=Tolerances(vanish_max=1e-3))
    labels = sorted(b.label for b in deg.branches)
    assert labels == [LABEL_VS, LABEL_ZERO]
    assert len(deg.large) == 4
    assert all(b.label == LABEL_LARGE for b in deg.large)
    assert deg.beta == 1 and deg.c == 2
    assert deg.gap > Tolerances().gap_min
    assert deg.values_at_zero() == pytest.approx([0.0, 1.0], abs=1e-10)


def test_classify_wrong_zero_count(circle16_branches):
    with pytest.raises(ZeroCountError):
        classify(circle16_branches, 2, 3, 6.0,
                 tol=Tolerances(vanish_max=1e-3))


def test_classify_gap_not_found_when_horizon_too_short():
    # 16 modes cannot push the tunneling branch below the default
    # vanish ceiling by t=8: the truncation floor sits near 2e-6
    cx = build_circle_complex(16, circle_sin2())
    grid = np.arange(0.0, 8.0 + 1e-9, 0.5)
    brs = track_branches(cx, 0, grid, k=6, tol=Tolerances())
    with pytest.raises(GapNotFoundError):
        classify(brs, 1, 2, 8.0, tol=Tolerances())


def test_branch_value_at_requires_sample(circle_cx8):
    grid = np.arange(0.0, 2.0 + 1e-9, 0.5)
    brs = track_branches(circle_cx8, 0, grid, k=2, tol=Tolerances())
    with pytest.raises(KeyError):
        brs[0].value_at(0.123)


def test_tracking_is_deterministic(circle_cx8):
    grid = np.arange(0.0, 3.0 + 1e-9, 0.5)
    a = track_branches(circle_cx8, 0, grid, k=4, tol=Tolerances())
    b = track_branches(circle_cx8, 0, grid, k=4, tol=Tolerances())
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
        assert np.array_equal(x.vectors, y.vectors)
