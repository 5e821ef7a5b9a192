"""Torsion of finite cochain complexes and the comparison functionals.

All determinants are kept in the log domain.  The torsion of a based
complex is assembled from modified determinants of its combinatorial
Laplacians; volumes of cohomology isomorphisms and of lattice bases in
the harmonic metric supply the correction factors that make the
spectral and combinatorial sides comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Tolerances
from .derham import DeRhamComplex, expand_1d, expand_2d, witten_laplacian
from .errors import ConfigError, NumericalError
from .trigpoly import TWO_PI, TrigPoly


@dataclass
class FiniteComplex:
    """Based finite cochain complex with optional Gram matrices.

    d[q] maps degree q to q+1; gram is None for orthonormal bases,
    otherwise one SPD matrix per degree.
    """

    dims: tuple
    d: list
    gram: list | None = None

    def __post_init__(self):
        if len(self.d) != len(self.dims) - 1:
            raise ConfigError("coboundary count does not match degree count")
        for q, m in enumerate(self.d):
            m = np.asarray(m, dtype=float)
            if m.shape != (self.dims[q + 1], self.dims[q]):
                raise ConfigError(f"coboundary {q} has shape {m.shape}, "
                                  f"expected {(self.dims[q + 1], self.dims[q])}")
            self.d[q] = m
        scale = max((np.max(np.abs(m)) for m in self.d if m.size), default=1.0)
        for a, b in zip(self.d[1:], self.d[:-1]):
            r = np.max(np.abs(a @ b)) if a.size and b.size else 0.0
            if r > 1e-10 * max(1.0, scale) ** 2:
                raise ConfigError(f"d following d is nonzero: residual {r:.2e}")
        if self.gram is not None:
            for q, G in enumerate(self.gram):
                G = np.asarray(G, dtype=float)
                if G.shape != (self.dims[q], self.dims[q]):
                    raise ConfigError(f"Gram {q} has wrong shape")
                if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
                    raise ConfigError(f"Gram {q} is not symmetric")
                self.gram[q] = 0.5 * (G + G.T)

    def orthonormalized(self) -> "FiniteComplex":
        """Basis change to orthonormal bases via Cholesky factors."""
        if self.gram is None:
            return self
        Ls = []
        for q, G in enumerate(self.gram):
            try:
                Ls.append(np.linalg.cholesky(G))
            except np.linalg.LinAlgError:
                raise NumericalError(f"Gram matrix in degree {q} is not "
                                     f"positive definite") from None
        d_new = []
        for q, m in enumerate(self.d):
            rhs = np.linalg.solve(Ls[q], m.T).T  # m @ L_q^{-T}
            d_new.append(Ls[q + 1].T @ rhs)
        return FiniteComplex(dims=self.dims, d=d_new, gram=None)

    def laplacians(self):
        fc = self.orthonormalized()
        out = []
        for q in range(len(self.dims)):
            L = np.zeros((fc.dims[q], fc.dims[q]))
            if q < len(fc.d):
                L += fc.d[q].T @ fc.d[q]
            if q > 0:
                L += fc.d[q - 1] @ fc.d[q - 1].T
            out.append(L)
        return out

    def betti(self):
        ranks = [int(np.linalg.matrix_rank(m)) if m.size else 0 for m in self.d]
        out = []
        for q in range(len(self.dims)):
            up = ranks[q] if q < len(ranks) else 0
            down = ranks[q - 1] if q > 0 else 0
            out.append(self.dims[q] - up - down)
        return tuple(out)


def det_prime(A: np.ndarray, nullity: int, tol: Tolerances | None = None):
    """Log of the product of nonzero eigenvalues of an SPD matrix.

    The declared nullity must be separated from the rest of the
    spectrum by the configured gap ratio, otherwise the determinant is
    not trustworthy and the computation refuses to continue.
    """
    tol = tol or Tolerances()
    A = np.asarray(A, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    if nullity < 0 or nullity > len(w):
        raise ConfigError(f"nullity {nullity} out of range for dim {len(w)}")
    if nullity == len(w):
        return 0.0, math.inf
    lam = w[nullity:]
    if lam[0] <= 0:
        raise NumericalError(f"nonpositive eigenvalue {lam[0]:.3e} past the "
                             f"declared kernel")
    junk = abs(w[nullity - 1]) if nullity > 0 else 0.0
    gap = lam[0] / junk if junk > 0 else math.inf
    if gap < tol.det_gap:
        raise NumericalError(
            f"kernel gap ratio {gap:.2e} below {tol.det_gap:.0e}: declared "
            f"nullity {nullity} is not resolved"
        )
    return float(np.sum(np.log(lam))), gap


def torsion_T(fc: FiniteComplex, nullities=None,
              tol: Tolerances | None = None) -> float:
    """Log torsion: sum over q of (-1)^{q+1} (q/2) log det' Delta_q."""
    tol = tol or Tolerances()
    if nullities is None:
        nullities = fc.betti()
    out = 0.0
    for q, L in enumerate(fc.laplacians()):
        if q == 0:
            continue  # weight q/2 vanishes
        ld, _ = det_prime(L, nullities[q], tol)
        out += (-1) ** (q + 1) * 0.5 * q * ld
    return out


@dataclass
class ComplexMorphism:
    """Degreewise linear maps between complexes, validated as a chain map."""

    domain: FiniteComplex
    codomain: FiniteComplex
    maps: list
    chain_residual: float = field(init=False)

    def __post_init__(self):
        if len(self.maps) != len(self.domain.dims):
            raise ConfigError("one map per degree required")
        for q, m in enumerate(self.maps):
            m = np.asarray(m, dtype=float)
            want = (self.codomain.dims[q], self.domain.dims[q])
            if m.shape != want:
                raise ConfigError(f"map {q} has shape {m.shape}, expected {want}")
            self.maps[q] = m
        resid = 0.0
        for q in range(len(self.domain.d)):
            lhs = self.codomain.d[q] @ self.maps[q]
            rhs = self.maps[q + 1] @ self.domain.d[q]
            scale = max(1.0, np.max(np.abs(lhs)), np.max(np.abs(rhs)))
            resid = max(resid, np.max(np.abs(lhs - rhs)) / scale)
        self.chain_residual = float(resid)

    def require_chain_map(self, rel_tol: float = 1e-8):
        if self.chain_residual > rel_tol:
            raise NumericalError(f"chain map residual {self.chain_residual:.2e} "
                                 f"exceeds {rel_tol:.0e}")


def vol_of_iso(phi: np.ndarray, dom_gram: np.ndarray | None = None,
               cod_gram: np.ndarray | None = None) -> float:
    """Log volume of a linear isomorphism between inner-product spaces.

    The square of the volume is det of the composition of phi with its
    metric adjoint, det(phi^adj phi) = det(phi^T G_cod phi)/det(G_dom).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != phi.shape[1]:
        raise ConfigError("volume of a non-square map")
    if phi.size == 0:
        return 0.0
    M = phi.T @ (cod_gram @ phi if cod_gram is not None else phi)
    sign, ld = np.linalg.slogdet(M)
    if sign <= 0:
        raise NumericalError("cohomology map is not an isomorphism")
    out = 0.5 * ld
    if dom_gram is not None:
        sg, lg = np.linalg.slogdet(dom_gram)
        if sg <= 0:
            raise NumericalError("domain Gram is singular")
        out -= 0.5 * lg
    return float(out)


def harmonic_basis(fc: FiniteComplex, q: int, nullity: int,
                   tol: Tolerances | None = None) -> np.ndarray:
    """Orthonormal kernel basis of the degree-q Laplacian, gap-checked."""
    tol = tol or Tolerances()
    L = fc.laplacians()[q]
    w, V = np.linalg.eigh(L)
    if nullity == 0:
        return np.zeros((fc.dims[q], 0))
    junk = abs(w[nullity - 1])
    live = w[nullity] if nullity < len(w) else math.inf
    if junk > 0 and live / junk < tol.det_gap:
        raise NumericalError(f"harmonic space in degree {q} not resolved: "
                             f"gap {live / junk:.2e}")
    return V[:, :nullity]


def cohomology_volumes(fc: FiniteComplex, classes: dict,
                       nullities=None, tol: Tolerances | None = None):
    """Log covolumes of given cocycle bases in the harmonic metric.

    classes maps q to a matrix whose columns are cocycles spanning
    H^q; each column is validated as a cocycle and the covolume is the
    Gram determinant of the harmonic projections.  Bases must live in
    the same coordinates as fc (orthonormal Grams).
    """
    tol = tol or Tolerances()
    if fc.gram is not None:
        raise ConfigError("cohomology_volumes expects an orthonormalized "
                          "complex")
    if nullities is None:
        nullities = fc.betti()
    out = {}
    for q, C in classes.items():
        C = np.asarray(C, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if q < len(fc.d) and C.size:
            r = np.max(np.abs(fc.d[q] @ C))
            if r > 1e-10 * max(1.0, np.max(np.abs(C))):
                raise ConfigError(f"class in degree {q} is not a cocycle "
                                  f"(residual {r:.2e})")
        if C.shape[1] != nullities[q]:
            raise ConfigError(f"{C.shape[1]} classes given in degree {q}, "
                              f"harmonic dimension is {nullities[q]}")
        H = harmonic_basis(fc, q, nullities[q], tol)
        P = H.T @ C  # harmonic coordinates of the classes
        sign, ld = np.linalg.slogdet(P.T @ P)
        if sign <= 0:
            raise NumericalError(f"classes in degree {q} do not span the "
                                 f"harmonic space")
        out[q] = 0.5 * float(ld)
    return out


def alternating_log(values: dict) -> float:
    """Sum of (-1)^q values[q] over degrees."""
    return float(sum((-1) ** q * v for q, v in values.items()))


# -- continuum harmonic lattices -------------------------------------------


def harmonic_volumes(cx: DeRhamComplex, tol: Tolerances | None = None):
    """Log volumes of the integer cohomology lattice in the L2 metric.

    The lattice generators are represented by the translation-invariant
    forms (1 in degree 0, the normalized angle differentials above),
    expanded in the cutoff basis and checked to be annihilated by the
    undeformed Laplacian.  Returns ({q: log V_q}, log of the
    alternating product).
    """
    tol = tol or Tolerances()
    N = cx.N
    gens = {}
    if cx.manifold == "circle":
        one = TrigPoly.const(1, 1.0)
        gens[0] = [expand_1d(one, N)]
        gens[1] = [expand_1d(one * (1.0 / TWO_PI), N)]
    else:
        one = TrigPoly.const(2, 1.0)
        v0 = expand_2d(one, N)
        scale = 1.0 / TWO_PI
        va = expand_2d(one * scale, N)
        zcol = np.zeros_like(va)
        gens[0] = [v0]
        gens[1] = [np.concatenate([va, zcol]), np.concatenate([zcol, va])]
        gens[2] = [expand_2d(one * scale * scale, N)]
    out = {}
    for q, vecs in gens.items():
        L = witten_laplacian(cx, q, 0.0)
        B = np.column_stack(vecs)
        r = np.max(np.abs(L @ B))
        if r > 1e-10 * max(1.0, float(np.max(np.abs(B)))):
            raise NumericalError(f"lattice generator in degree {q} is not "
                                 f"harmonic (residual {r:.2e})")
        sign, ld = np.linalg.slogdet(B.T @ B)
        if sign <= 0:
            raise NumericalError(f"degenerate lattice basis in degree {q}")
        out[q] = 0.5 * float(ld)
    return out, alternating_log(out)


def integer_cohomology_classes(mc, manifold: str) -> dict:
    """Integer cocycle generators of the critical-point complex.

    Degree 0: the constant cochain.  Top degree: the indicator of one
    maximum.  Torus degree 1: for each factor, the indicator of the
    saddles built from one fixed factor maximum, summed over the other
    factor's minima (the product of a factor generator with a constant).
    """
    pts = mc.points
    if manifold == "circle":
        c0, c1 = len(mc.degrees[0]), len(mc.degrees[1])
        g1 = np.zeros(c1)
        g1[0] = 1.0
        return {0: np.ones((c0, 1)), 1: g1[:, None]}
    c = [len(mc.degrees[q]) for q in range(3)]
    saddles = [pts[i] for i in mc.degrees[1]]
    maxima = [pts[i] for i in mc.degrees[2]]
    # factor maxima are read off the coordinates of the product maxima
    m1_star = maxima[0].coords[0]
    m2_star = maxima[0].coords[1]
    g1a = np.zeros(c[1])
    g1b = np.zeros(c[1])
    for j, s in enumerate(saddles):
        if abs(s.coords[0] - m1_star) < 1e-9:
            g1a[j] = 1.0
        if abs(s.coords[1] - m2_star) < 1e-9:
            g1b[j] = 1.0
    g2 = np.zeros(c[2])
    for j, m in enumerate(maxima):
        if abs(m.coords[0] - m1_star) < 1e-9 and abs(m.coords[1] - m2_star) < 1e-9:
            g2[j] = 1.0
    return {0: np.ones((c[0], 1)), 1: np.column_stack([g1a, g1b]),
            2: g2[:, None]}


# -- theorem assembly -------------------------------------------------------


@dataclass
class TorsionReport:
    """Both assemblies of the comparison formula with their target.

    working combines the branch term with minus log a(0) and minus the
    log lattice volume; printed flips the sign of the log a(0) term,
    matching the published formula.  target is the log torsion of the
    critical-point complex corrected by its own lattice covolume, which
    is zero for both model manifolds.
    """

    manifold: str
    branch_term: float
    log_a0: float
    log_lattice_volume: float  # alternating product over the continuum lattice
    log_T_morse: float
    log_W_morse: float  # alternating covolume of the integer classes
    working: float
    printed: float
    target: float
    residual_working: float
    residual_printed: float
    anomaly: list  # (t, composite identity residual)
    terms: dict

    @property
    def working_matches(self) -> bool:
        return self.residual_working <= 1e-4

    @property
    def printed_matches(self) -> bool:
        return self.residual_printed <= 1e-4


def branch_term_from_values(values_by_degree: dict) -> float:
    """Half-weighted alternating sum of log positive branch values.

    values_by_degree maps q to the branch values to include (the
    positive part of the package); zeros must already be excluded.
    """
    out = 0.0
    for q, vals in values_by_degree.items():
        if q == 0:
            continue
        for v in vals:
            if v <= 0:
                raise NumericalError(f"nonpositive branch value {v} in the "
                                     f"branch term")
            out += (-1) ** (q + 1) * 0.5 * q * math.log(v)
    return out


def check_anomaly(log_T_vs: float, log_a: float, log_volH: float,
                  log_T_morse: float, tol_abs: float = 1e-3):
    """Composite identity residual at one deformation value.

    The spectral torsion, the pairing determinant, and the cohomology
    volume are computed by independent code paths; their combination
    must reproduce the critical-point torsion at every t.
    """
    resid = abs(log_T_vs - log_a + log_volH - log_T_morse)
    return resid <= tol_abs, float(resid)


def evaluate_theorem(manifold: str, branch_term: float, log_a0: float,
                     log_lattice_volume: float, log_T_morse: float,
                     log_W_morse: float, anomaly=None, terms=None,
                     tol_abs: float = 1e-4) -> TorsionReport:
    """Assemble both comparison formulas against the lattice target."""
    working = branch_term - log_a0 - log_lattice_volume
    printed = branch_term + log_a0 - log_lattice_volume
    target = log_T_morse - log_W_morse
    return TorsionReport(
        manifold=manifold,
        branch_term=branch_term,
        log_a0=log_a0,
        log_lattice_volume=log_lattice_volume,
        log_T_morse=log_T_morse,
        log_W_morse=log_W_morse,
        working=working,
        printed=printed,
        target=target,
        residual_working=abs(working - target),
        residual_printed=abs(printed - target),
        anomaly=list(anomaly or []),
        terms=dict(terms or {}),
    )
