"""Eigenvalue branch continuation for the deformed Laplacian family.

The family Delta^q(t) is real analytic in t, so its eigenvalues organize
into analytic branches with analytic (subspace-wise unique) eigenvector
choices.  We recover them discretely: dense solves on a t-grid, stitched
by maximum-overlap assignment, with adaptive bisection wherever vectors
rotate too fast between samples (avoided crossings), and a first-order
perturbation polish at t = 0 where the flat spectrum is degenerate.

Tracking runs from t_max down to 0: at t_max the wanted branches are the
k smallest eigenvalues (the whole point of the deformation), while at
t = 0 they generally are not.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .config import Tolerances
from .derham import DeRhamComplex, LaplacianFamily, laplacian_family
from .errors import (
    ConfigError,
    GapNotFoundError,
    NumericalError,
    TrackingError,
    ZeroCountError,
)

LABEL_ZERO = "ZERO"
LABEL_VS = "VS_POSITIVE"
LABEL_LARGE = "LARGE"


def eig_sym(A, k: int | None = None, residual_tol: float = 1e-9):
    """Validated symmetric eigensolve, eigenvalues ascending.

    Returns (w, V) for the k smallest pairs (all if k is None).  Both the
    input symmetry and the residual ||A v - lambda v|| of every returned
    pair are checked against residual_tol * ||A||.  Sparse input takes a
    shift-inverted iterative path and then requires an explicit k.
    """
    if sp.issparse(A):
        if k is None:
            raise ConfigError("full sparse eigendecomposition is not "
                              "supported; pass an explicit k")
        return _eig_smallest_sparse(A, k, residual_tol)
    A = np.asarray(A, dtype=float)
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > residual_tol * (1.0 + scale):
        raise NumericalError(f"matrix is not symmetric: asymmetry {asym:.3e}")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    spec_scale = max(1.0, float(np.max(np.abs(w))))
    if k is not None:
        w, V = w[:k], V[:, :k]
    res = float(np.max(np.abs(A @ V - V * w))) if w.size else 0.0
    if res > residual_tol * spec_scale:
        raise NumericalError(f"eigenpair residual {res:.3e} exceeds tolerance")
    return w, V


def _eig_smallest_sparse(A, k: int, residual_tol: float = 1e-9):
    """k smallest eigenpairs of a sparse symmetric PSD-shifted matrix.

    Shift-invert Lanczos at sigma = -1/2 (strictly below the spectrum of
    every deformed Laplacian, which is PSD up to rounding), so the k
    eigenvalues closest to sigma are exactly the k smallest.  Residuals
    are checked against the same relative tolerance as the dense path;
    the start vector is fixed to keep runs reproducible.
    """
    A = A.tocsc()
    n = A.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"sparse eigensolve needs 1 <= k <= {n - 1}, got {k}")
    scale = float(abs(A).max()) if A.nnz else 0.0
    asym = float(abs(A - A.T).max()) if A.nnz else 0.0
    if asym > residual_tol * (1.0 + scale):
        raise NumericalError(f"matrix is not symmetric: asymmetry {asym:.3e}")
    S = (0.5 * (A + A.T)).tocsc()
    # fixed start vector: reruns must produce identical output files
    v0 = np.random.default_rng(682137).standard_normal(n)
    # single-vector Krylov spaces drop copies of (near-)degenerate
    # eigenvalues unless the restart basis is generous; 6k was enough for
    # the multiplicity-8 flat clusters with a wide margin, and the cap
    # keeps wide windows from driving the restart cost quadratically
    ncv = min(n, 6 * k + 20, 2 * k + 200)
    w, V = spla.eigsh(S, k=k, sigma=-0.5, which="LM", tol=0, v0=v0,
                      ncv=ncv, maxiter=100 * k)
    order = np.argsort(w, kind="stable")
    w, V = w[order], V[:, order]
    res = float(np.max(np.abs(S @ V - V * w))) if w.size else 0.0
    if res > residual_tol * max(1.0, scale):
        raise NumericalError(f"eigenpair residual {res:.3e} exceeds tolerance")
    return w, V


def eigenvalue_clusters(w: np.ndarray, cluster_rel: float):
    """Partition an ascending eigenvalue list into near-degenerate runs.

    Returns a list of (lo, hi) index ranges, hi exclusive.
    """
    out = []
    lo = 0
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > cluster_rel * (1.0 + abs(w[i])):
            out.append((lo, i))
            lo = i
    out.append((lo, len(w)))
    return out


def match_step(prev_V: np.ndarray, w_next: np.ndarray, V_next: np.ndarray,
               cluster_rel: float = 1e-6):
    """Match tracked vectors to the eigenbasis at the next parameter value.

    prev_V has one column per tracked branch; (w_next, V_next) is a full
    ascending eigendecomposition.  Returns (cols, W, overlaps): column
    indices into V_next per branch, the aligned vectors, and the diagonal
    overlaps after alignment.  Assignment maximizes total |<v_prev, v>|;
    inside near-degenerate clusters of w_next an arbitrary orthogonal
    rotation is permitted (the eigenvectors are only subspace-unique
    there), realized as an orthogonal Procrustes fit to the predecessors.
    """
    k = prev_V.shape[1]
    O = prev_V.T @ V_next
    rows, cols_raw = linear_sum_assignment(-np.abs(O))
    cols = np.empty(k, dtype=int)
    cols[rows] = cols_raw
    W = V_next[:, cols].copy()

    for lo, hi in eigenvalue_clusters(w_next, cluster_rel):
        if hi - lo < 2:
            continue
        sel = np.nonzero((cols >= lo) & (cols < hi))[0]
        if sel.size == 0:
            continue
        # the tracked branches may cover only part of this eigenspace (the
        # k-cutoff can split an exactly degenerate pair), so fit them by
        # projecting the predecessors onto the whole cluster subspace and
        # taking the nearest orthonormal set
        sub = V_next[:, lo:hi]
        C = sub.T @ prev_V[:, sel]
        U, _, Vt = np.linalg.svd(C, full_matrices=False)
        W[:, sel] = sub @ (U @ Vt)

    ov = np.sum(prev_V * W, axis=0)
    flip = ov < 0
    W[:, flip] *= -1.0
    return cols, W, np.abs(ov)


def _rebase_split_groups(prev_V, w_next, V_next, cols, W, ov, tol):
    """Resolve tracked groups caught mixed across a newly-resolved split.

    Branches whose eigenvalues stay within the clustering tolerance over
    a parameter interval are only jointly determined there: every solver
    returns an arbitrary basis of the joint eigenspace, so the tracked
    vectors can straddle the analytic sub-families (splittings shrink
    below any resolution, e.g. exponentially in t).  When the splitting
    re-emerges past the clustering tolerance, per-branch continuation is
    impossible: the mixed vectors overlap every sub-cluster partially
    and no bisection fixes that.  The group as a whole is still intact,
    which is checkable: its span must match the union of the candidate
    sub-clusters.  After that certificate, branches are slotted to
    sub-clusters by projection energy and replaced by the nearest
    orthonormal vectors inside their new cluster, which redefines the
    individual labels in the only way the mathematics determines them.

    Returns (cols, W, ov) with the certificate recorded as the overlap
    of re-based branches, or None when no safe re-base exists (callers
    then fall back to window growth or a hard error).
    """
    k = prev_V.shape[1]
    bad = np.nonzero(ov < tol.overlap_min)[0]
    if bad.size == 0:
        return None
    clusters = eigenvalue_clusters(w_next, tol.cluster_rel)
    ncl = len(clusters)
    E = np.zeros((k, ncl))
    for ci, (lo, hi) in enumerate(clusters):
        P = V_next[:, lo:hi].T @ prev_V
        E[:, ci] = np.sum(P * P, axis=0)
    # connected components of the branch-cluster graph over significant
    # projection energies; a component is one jointly-determined group
    adj = E >= 0.1
    comp = -np.ones(k, dtype=int)
    ccomp = -np.ones(ncl, dtype=int)
    nc = 0
    for i in range(k):
        if comp[i] >= 0:
            continue
        comp[i] = nc
        stack = [("b", i)]
        while stack:
            kind, idx = stack.pop()
            if kind == "b":
                for ci in np.nonzero(adj[idx])[0]:
                    if ccomp[ci] < 0:
                        ccomp[ci] = nc
                        stack.append(("c", ci))
            else:
                for bi in np.nonzero(adj[:, idx])[0]:
                    if comp[bi] < 0:
                        comp[bi] = nc
                        stack.append(("b", bi))
        nc += 1
    cols = cols.copy()
    W = W.copy()
    ov = ov.copy()
    scale = max(1.0, float(np.max(np.abs(w_next))))
    for g in sorted(set(comp[bad].tolist())):
        bidx = np.nonzero(comp == g)[0]
        cidx = np.nonzero(ccomp == g)[0]
        if cidx.size == 0:
            return None
        col_pool = np.concatenate([np.arange(*clusters[ci]) for ci in cidx])
        if col_pool.size < bidx.size:
            return None
        # mixing can only accumulate while the solver saw one cluster, so
        # the values involved must sit in a narrow band; a wide band means
        # a different failure and re-basing would glue distinct branches
        vals = w_next[col_pool]
        if np.max(vals) - np.min(vals) > 100.0 * tol.cluster_rel * scale:
            return None
        U = V_next[:, col_pool]
        S = U.T @ prev_V[:, bidx]
        sv = np.linalg.svd(S, compute_uv=False)
        if sv[bidx.size - 1] < tol.overlap_min:
            return None
        cert = float(sv[bidx.size - 1])
        slot_cols = []
        slot_cl = []
        for ci in cidx:
            lo, hi = clusters[ci]
            slot_cols.extend(range(lo, hi))
            slot_cl.extend([ci] * (hi - lo))
        cost = -E[np.ix_(bidx, np.array(slot_cl))]
        rr, cc = linear_sum_assignment(cost)
        chosen = {}
        for r, c in zip(rr, cc):
            chosen.setdefault(slot_cl[c], []).append((bidx[r], slot_cols[c]))
        for ci, pairs in chosen.items():
            lo, hi = clusters[ci]
            sub = V_next[:, lo:hi]
            members = np.array([b for b, _ in pairs])
            C = sub.T @ prev_V[:, members]
            Uu, _, Vt = np.linalg.svd(C, full_matrices=False)
            New = sub @ (Uu @ Vt)
            sgn = np.sum(prev_V[:, members] * New, axis=0)
            New[:, sgn < 0] *= -1.0
            W[:, members] = New
            for b, col in pairs:
                cols[b] = col
            align = np.abs(np.sum(prev_V[:, members] * New, axis=0))
            ov[members] = np.maximum(align, cert)
    if float(np.min(ov)) < tol.overlap_min:
        return None
    return cols, W, ov


def _polish_t0(w_full, V_full, cols, W, A1, cluster_rel):
    """Replace t=0 vectors by their analytic limits from t > 0.

    Within each exactly degenerate eigenspace of Delta(0) the limits of
    the analytic branches lie in eigenspaces of the first-order term A1
    restricted there (degenerate perturbation theory); the corresponding
    A1 eigenvalue is the branch's slope at 0.  Where A1 is itself
    degenerate the limit is pinned only up to that sub-eigenspace, so the
    incoming vectors are fitted into it by a nearest-orthonormal
    projection: as the last tracking step shrinks they converge to the
    true limits, and the caller's overlap check certifies that.

    Returns (vectors, slopes, cluster_key) with cluster_key shared among
    branches whose t=0 subspace is only jointly determined.
    """
    k = W.shape[1]
    slopes = np.zeros(k)
    cluster_key = np.arange(k)
    for lo, hi in eigenvalue_clusters(w_full, cluster_rel):
        sel = np.nonzero((cols >= lo) & (cols < hi))[0]
        if sel.size == 0:
            continue
        U = V_full[:, lo:hi]
        B = U.T @ (A1 @ U)  # grouping keeps the sparse A1 path dense-free
        s_all, Q = np.linalg.eigh(0.5 * (B + B.T))
        cand = U @ Q
        # pick which first-order candidate each tracked branch continues into
        Ov = W[:, sel].T @ cand
        r, c = linear_sum_assignment(-np.abs(Ov))
        chosen = np.empty(sel.size, dtype=int)
        chosen[r] = c
        for glo, ghi in eigenvalue_clusters(s_all, cluster_rel):
            mem = sel[(chosen >= glo) & (chosen < ghi)]
            if mem.size == 0:
                continue
            G = cand[:, glo:ghi]
            C = G.T @ W[:, mem]
            Uu, _, Vt = np.linalg.svd(C, full_matrices=False)
            New = G @ (Uu @ Vt)
            ovd = np.sum(W[:, mem] * New, axis=0)
            New[:, ovd < 0] *= -1.0
            W[:, mem] = New
            slopes[mem] = float(np.mean(s_all[glo:ghi]))
            if mem.size >= 2:
                cluster_key[mem] = int(np.min(mem))
    return W, slopes, cluster_key


@dataclass
class EigenBranch:
    """One tracked analytic branch (lambda(t), v(t)) of a single degree."""

    degree: int
    ts: np.ndarray  # ascending sample parameters (grid plus refinements)
    values: np.ndarray
    vectors: np.ndarray  # shape (len(ts), dim), unit columns of the family
    overlaps: np.ndarray  # consecutive aligned overlaps, len(ts) - 1
    label: str = ""
    critical_point: int | None = None
    mass: float | None = None
    t0_slope: float | None = None
    t0_cluster: int | None = None  # shared id marks a jointly-determined subspace

    def value_at(self, t: float) -> float:
        i = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[i] - t) > 1e-9 * (1 + abs(t)):
            raise KeyError(f"t={t} is not a sample of this branch")
        return float(self.values[i])

    def vector_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[i] - t) > 1e-9 * (1 + abs(t)):
            raise KeyError(f"t={t} is not a sample of this branch")
        return self.vectors[i]


def track_branches(cx: DeRhamComplex, q: int, grid, k: int | None = None,
                   tol: Tolerances | None = None,
                   family: LaplacianFamily | None = None):
    """Track the k branches that are smallest at the last grid point.

    The grid must be strictly increasing and start at 0.  Adaptive
    bisection inserts samples wherever the consecutive overlap falls
    below tol.overlap_min, down to 2^-6 of the smallest grid step; if
    matching still fails there, a TrackingError reports the interval
    rather than silently permuting branches.
    """
    tol = tol or Tolerances()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise TrackingError("grid must be strictly increasing with >= 2 points")
    if abs(grid[0]) > 1e-12:
        raise TrackingError("grid must start at t = 0")
    fam = family if family is not None else laplacian_family(cx, q)
    dim = fam.dim
    if k is None:
        k = min(dim, 10)
    if k > dim:
        raise TrackingError(f"k={k} exceeds dimension {dim}")
    min_step = float(np.min(np.diff(grid))) * 2.0**-6
    sparse_mode = sp.issparse(fam.A0)
    # iterative solves only see a window of the spectrum.  Matching may
    # only ever look at candidates whose full eigenvalue cluster fits in
    # the window: a cluster cut by the window edge comes back as an
    # arbitrary partial slice of the degenerate subspace, and adopting
    # such a slice corrupts the tracked branch without tripping the
    # per-step overlap gate.  The pool below therefore drops the top
    # cluster and the window grows until the remaining complete
    # clusters cover every tracked value with a margin.
    window = min(dim - 2, max(2 * k + 4, k + 8)) if sparse_mode else None
    window_cap = min(dim - 2, max(256, 8 * k)) if sparse_mode else None

    def solve_covered(t, needed=None):
        nonlocal window
        while True:
            if not sparse_mode:
                return np.linalg.eigh(fam.at(t))
            w, V = _eig_smallest_sparse(fam.at(t), window, tol.eig_residual)
            eps = tol.cluster_rel * max(1.0, float(abs(w[-1])))
            j = w.size - 1
            while j > 0 and w[j] - w[j - 1] <= eps:
                j -= 1
            if j >= k and (needed is None or
                           w[j - 1] >= needed + 1e-2 * (1.0 + abs(needed))):
                return w[:j], V[:, :j]
            if window >= window_cap:
                raise TrackingError(
                    f"eigensolver window cap {window_cap} cannot cover the "
                    f"tracked branches at t={t:.6g}"
                )
            window = min(window_cap, 2 * window)

    t_cur = float(grid[-1])
    w_full, V_full = solve_covered(t_cur)
    _validate_residuals(fam.at(t_cur), w_full[:k], V_full[:, :k], tol.eig_residual,
                        float(max(1.0, np.max(np.abs(w_full)))))
    cur_V = V_full[:, :k].copy()
    cur_w = w_full[:k].copy()
    samples = [(t_cur, w_full[:k].copy(), cur_V.copy())]
    step_overlaps = []
    t0_slopes = None
    t0_cluster_key = None

    for target in reversed(grid[:-1].tolist()):
        seg = [float(target)]
        while seg:
            t_next = seg[-1]
            w_full, V_full = solve_covered(t_next, needed=float(np.max(cur_w)))
            cols, W, ov = match_step(cur_V, w_full, V_full, tol.cluster_rel)
            if (float(np.min(ov)) < tol.overlap_min
                    and (t_cur - t_next) <= min_step * (1 + 1e-9)):
                re = _rebase_split_groups(cur_V, w_full, V_full, cols, W,
                                          ov, tol)
                if re is not None:
                    cols, W, ov = re
            if t_next == grid[0] and float(np.min(ov)) >= tol.overlap_min:
                # replace the endpoint vectors by their analytic limits;
                # the overlap then certifies continuation into the limit,
                # and bisection below shrinks the last step if the samples
                # have not converged to it yet
                W, t0_slopes, t0_cluster_key = _polish_t0(
                    w_full, V_full, cols, W, fam.A1, tol.cluster_rel
                )
                ov = np.abs(np.sum(cur_V * W, axis=0))
            if float(np.min(ov)) < tol.overlap_min:
                if (t_cur - t_next) <= min_step * (1 + 1e-9):
                    if sparse_mode and window < window_cap:
                        # the continuation may live outside the solver
                        # window; widen and retry before giving up
                        window = min(window_cap, 2 * window)
                        continue
                    raise TrackingError(
                        f"branch matching failed on [{t_next:.6g}, {t_cur:.6g}] "
                        f"(min overlap {np.min(ov):.3f} at minimal step)"
                    )
                seg.append(0.5 * (t_cur + t_next))
                continue
            if t_next == grid[0]:
                scale = float(max(1.0, np.max(np.abs(w_full))))
                _validate_residuals(fam.at(t_next), w_full[cols], W,
                                    tol.eig_residual, scale)
            seg.pop()
            samples.append((t_next, w_full[cols].copy(), W.copy()))
            step_overlaps.append(ov)
            cur_V, cur_w, t_cur = W, w_full[cols].copy(), t_next

    samples.reverse()
    step_overlaps.reverse()
    ts = np.array([s[0] for s in samples])
    vals = np.stack([s[1] for s in samples])  # (n_samples, k)
    vecs = np.stack([s[2] for s in samples])  # (n_samples, dim, k)
    ovs = (np.stack(step_overlaps) if step_overlaps
           else np.zeros((0, k)))

    branches = []
    for j in range(k):
        br = EigenBranch(
            degree=q,
            ts=ts.copy(),
            values=vals[:, j].copy(),
            vectors=vecs[:, :, j].copy(),
            overlaps=ovs[:, j].copy(),
        )
        if t0_slopes is not None:
            br.t0_slope = float(t0_slopes[j])
            br.t0_cluster = int(t0_cluster_key[j])
        branches.append(br)
    return branches


def _validate_residuals(A, w, V, residual_tol, scale):
    res = float(np.max(np.abs(A @ V - V * w))) if len(w) else 0.0
    if res > residual_tol * scale:
        raise NumericalError(f"eigenpair residual {res:.3e} exceeds tolerance")


# -- classification ------------------------------------------------------


@dataclass
class PackageDegree:
    """Classified branches of one degree: the small package plus diagnostics."""

    degree: int
    branches: list  # ZERO then VS_POSITIVE, the c_q package members
    large: list  # remaining tracked branches, label LARGE
    beta: int
    c: int
    gap: float
    tol_zero: float
    assignment_warnings: list = field(default_factory=list)

    @property
    def t_max(self) -> float:
        return float(self.branches[0].ts[-1])

    def values_at_zero(self):
        return sorted(b.value_at(0.0) for b in self.branches)


@dataclass
class SpectralPackage:
    """Virtually small spectral package: per-degree classified branches."""

    manifold: str
    grid: np.ndarray
    degrees: dict  # q -> PackageDegree

    def counts(self):
        return {q: (pd.beta, pd.c) for q, pd in self.degrees.items()}


def classify(branches, beta_q: int, c_q: int, t_max: float,
             tol: Tolerances | None = None) -> PackageDegree:
    """Split tracked branches into ZERO / VS_POSITIVE / LARGE.

    ZERO means identically zero along the whole branch (within tol_zero,
    scaled by the largest tracked value); exactly beta_q of these must
    exist.  The next c_q - beta_q branches by final value must both fall
    below vanish_max and keep decaying across [t_max/2, t_max]; the rest
    must sit above growth_floor and keep growing.  The separation ratio
    between the two groups at t_max is recorded and enforced.
    """
    tol = tol or Tolerances()
    if c_q <= 0 or beta_q < 0 or c_q < beta_q:
        raise ConfigError(f"degenerate classification counts beta={beta_q}, c={c_q}")
    if len(branches) < c_q:
        raise ConfigError(f"need at least c_q={c_q} tracked branches, got {len(branches)}")
    q = branches[0].degree
    t_half = t_max / 2.0

    scale = max(float(np.max(np.abs(b.values))) for b in branches)
    tol_zero = tol.zero_rel * (1.0 + scale)

    if min(float(np.min(b.values)) for b in branches) < -tol_zero:
        raise NumericalError("negative eigenvalue beyond kernel tolerance")

    zero, rest = [], []
    for b in branches:
        (zero if float(np.max(np.abs(b.values))) <= tol_zero else rest).append(b)
    if len(zero) != beta_q:
        raise ZeroCountError(
            f"degree {q}: found {len(zero)} identically-zero branches, "
            f"expected beta={beta_q} (tol_zero={tol_zero:.3e})"
        )
    for b in zero:
        b.label = LABEL_ZERO

    rest.sort(key=lambda b: b.value_at(t_max))
    n_vs = c_q - beta_q
    vs, large = rest[:n_vs], rest[n_vs:]
    for b in vs:
        lamT, lamH = b.value_at(t_max), b.value_at(b.ts[_nearest(b.ts, t_half)])
        if lamT > tol.vanish_max:
            raise GapNotFoundError(
                f"degree {q}: candidate small branch has lambda({t_max})="
                f"{lamT:.3e} > {tol.vanish_max:.1e}; raise t_max or the cutoff"
            )
        if lamT > tol.decay_ratio * max(lamH, tol_zero):
            raise GapNotFoundError(
                f"degree {q}: branch fails the decay test "
                f"lambda({t_max})={lamT:.3e} vs lambda({t_half})={lamH:.3e}"
            )
        b.label = LABEL_VS
    for b in large:
        lamT, lamH = b.value_at(t_max), b.value_at(b.ts[_nearest(b.ts, t_half)])
        if lamT < tol.growth_floor or lamT <= lamH:
            raise GapNotFoundError(
                f"degree {q}: branch expected to grow has lambda({t_max})="
                f"{lamT:.3e}, lambda({t_half})={lamH:.3e}"
            )
        b.label = LABEL_LARGE

    small_top = max([b.value_at(t_max) for b in vs] + [tol_zero])
    if large:
        gap = min(b.value_at(t_max) for b in large) / small_top
        if gap < tol.gap_min:
            raise GapNotFoundError(
                f"degree {q}: small/large separation {gap:.2f} below "
                f"{tol.gap_min}; raise t_max"
            )
    else:
        gap = float("inf")

    vs.sort(key=lambda b: b.value_at(0.0))
    return PackageDegree(
        degree=q, branches=zero + vs, large=large, beta=beta_q, c=c_q,
        gap=float(gap), tol_zero=float(tol_zero),
    )


def _nearest(ts, t):
    return int(np.argmin(np.abs(np.asarray(ts) - t)))


def _absolute_clusters(w, tol_abs):
    out, lo = [], 0
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > tol_abs:
            out.append((lo, i))
            lo = i
    out.append((lo, len(w)))
    return out


# -- localization and critical point assignment --------------------------


def _box_axes(center, radius, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    pts = center + radius * x
    return pts, radius * w


def localization_masses(cx: DeRhamComplex, q: int, vectors: np.ndarray,
                        centers, radius: float, nodes: int | None = None):
    """Mass of each form in a coordinate box around each center.

    vectors has one degree-q coefficient column per form; returns the
    (n_forms, n_centers) matrix of integrals of |omega|^2 over the boxes.
    The pointwise norm is the sum of squared scalar components since the
    coframe bases are orthonormal.
    """
    if nodes is None:
        nodes = max(48, 2 * cx.N + 10)
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.shape[0] == cx.dims[q] and vectors.ndim == 2:
        cols = vectors.T
    else:
        cols = vectors
    out = np.zeros((len(cols), len(centers)))
    for jp, ctr in enumerate(centers):
        ctr = np.atleast_1d(np.asarray(ctr, dtype=float))
        axes = [_box_axes(c, radius, nodes) for c in ctr]
        for jf, v in enumerate(cols):
            acc = 0.0
            for block in cx.form_components(q, v):
                vals = cx.eval_scalar_grid(block, *[a[0] for a in axes])
                if cx.manifold == "circle":
                    acc += float(np.sum(axes[0][1] * vals**2))
                else:
                    acc += float(axes[0][1] @ vals**2 @ axes[1][1])
            out[jf, jp] = acc
    return out


def _box_gram(cx, q, W, center, radius, nodes):
    """Gram matrix of the columns of W over one coordinate box."""
    ctr = np.atleast_1d(np.asarray(center, dtype=float))
    axes = [_box_axes(c, radius, nodes) for c in ctr]
    k = W.shape[1]
    G = np.zeros((k, k))
    for block_i in range(len(cx.form_components(q, W[:, 0]))):
        vals = []
        for j in range(k):
            block = cx.form_components(q, W[:, j])[block_i]
            vals.append(cx.eval_scalar_grid(block, *[a[0] for a in axes]))
        for a in range(k):
            for b in range(a, k):
                if cx.manifold == "circle":
                    g = float(np.sum(axes[0][1] * vals[a] * vals[b]))
                else:
                    g = float(axes[0][1] @ (vals[a] * vals[b]) @ axes[1][1])
                G[a, b] += g
                G[b, a] = G[a, b]
    return G


def assign_to_critical_points(pkg: PackageDegree, points, cx: DeRhamComplex,
                              tol: Tolerances | None = None) -> PackageDegree:
    """Bijectively pin each package branch to an index-q critical point.

    Eigenforms at t_max concentrate near critical points, but within an
    (asymptotically) degenerate cluster only their span is canonical, so
    the localized representatives are recovered first: per cluster, a
    greedy deflation picks the unit combination with the largest box mass
    at some remaining point, then the global branch-to-point bijection is
    read off an optimal assignment.  Masses below mass_min are recorded
    as warnings; the best-effort assignment is still returned.
    """
    tol = tol or Tolerances()
    pool = pkg.branches
    if len(points) != len(pool):
        raise ZeroCountError(
            f"degree {pkg.degree}: {len(pool)} package branches vs "
            f"{len(points)} critical points"
        )
    t_max = pkg.t_max
    q = pkg.degree
    W = np.column_stack([b.vector_at(t_max) for b in pool])
    lamT = np.array([b.value_at(t_max) for b in pool])
    coords = [getattr(p, "coords", p) for p in points]
    radius, nodes = tol.mass_radius, max(48, 2 * cx.N + 10)

    order = np.argsort(lamT, kind="stable")
    reps = np.zeros_like(W)
    rep_of_branch = np.empty(len(pool), dtype=int)
    rep_count = 0
    avail = set(range(len(coords)))
    # the package branches all decay to zero, so at t_max they are
    # near-degenerate on the vanish_max scale (their mutual splittings are
    # exponentially small); localized combinations live across those
    # splittings, hence the absolute cluster threshold here
    for lo, hi in _absolute_clusters(lamT[order], max(tol.vanish_max, pkg.tol_zero)):
        sel = order[lo:hi]
        Wc = W[:, sel]
        kc = len(sel)
        grams = {p: _box_gram(cx, q, Wc, coords[p], radius, nodes)
                 for p in sorted(avail)}
        chosen_u = []
        for _ in range(kc):
            best = None
            for p in sorted(grams):
                s, U = np.linalg.eigh(grams[p])
                if best is None or s[-1] > best[0]:
                    best = (s[-1], p, U[:, -1])
            _, p_star, u = best
            chosen_u.append(u)
            del grams[p_star]
            avail.discard(p_star)
            P = np.eye(kc) - np.outer(u, u)
            for p in grams:
                grams[p] = P @ grams[p] @ P
        R = np.column_stack(chosen_u)  # orthogonal: deflation keeps u's orthonormal
        reps[:, rep_count:rep_count + kc] = Wc @ R
        # branch <-> representative bijection inside the cluster
        r, c = linear_sum_assignment(-np.abs(R))
        for a, b in zip(r, c):
            rep_of_branch[sel[a]] = rep_count + b
        rep_count += kc

    M = localization_masses(cx, q, reps.T, coords, radius, nodes)
    rr, cc = linear_sum_assignment(-M)
    point_of_rep = np.empty(len(pool), dtype=int)
    point_of_rep[rr] = cc

    pkg.assignment_warnings = []
    for i, b in enumerate(pool):
        rep = rep_of_branch[i]
        pt = int(point_of_rep[rep])
        b.critical_point = pt
        b.mass = float(M[rep, pt])
        if b.mass < tol.mass_min:
            pkg.assignment_warnings.append(
                (i, pt, b.mass)
            )
    return pkg
