"""Isometric representations on weighted l_p spaces and their averaging operators.

A ``Representation`` acts on fields X -> R^d by (pi_g f)(x) = f(g^-1 x); the
``MarkovOperator`` of a measure mu averages these isometries.  The canonical
splitting into invariant fields and their complement is realized concretely:
invariant fields are those constant on each orbit, the complement consists of
fields with zero weighted mean on each orbit.  For transitive actions this is
the usual constants / mean-zero splitting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .group_core import FiniteAction, GroupElement
from .measures import DiscreteMeasure, convolve, translate

__all__ = [
    "Representation",
    "VectorField",
    "Decomposition",
    "MarkovOperator",
    "NormEstimate",
    "markov_operator",
    "restricted_norm",
    "neumann_projection",
    "iterate_to_projection",
    "operator_identities_check",
    "IdentityReport",
    "IterateResult",
]

DENSE_LIMIT = 4096  # largest N for which dense N x N matrices are built


class Representation:
    """Isometric action on l_p(X, nu; R^d) with the l_p fiber norm."""

    def __init__(self, action: FiniteAction, p: float = 2.0, d: int = 1) -> None:
        if not 1.0 < p < np.inf:
            raise ValueError(f"exponent p must lie in (1, inf), got {p}")
        if d < 1:
            raise ValueError(f"fiber dimension must be >= 1, got {d}")
        self.action = action
        self.p = float(p)
        self.d = int(d)

    @property
    def n_points(self) -> int:
        return self.action.n_points

    def _coerce(self, values: np.ndarray) -> np.ndarray:
        f = np.asarray(values, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        if f.shape != (self.n_points, self.d):
            raise ValueError(
                f"field shape {f.shape} does not match ({self.n_points}, {self.d})"
            )
        return f

    def norm(self, values: np.ndarray) -> float:
        f = self._coerce(values)
        p = self.p
        per_point = np.sum(np.abs(f) ** p, axis=1)
        return float(np.sum(self.action.weights * per_point) ** (1.0 / p))

    def apply_element(self, el: GroupElement, values: np.ndarray) -> np.ndarray:
        """(pi_g f)(x) = f(g^-1 x)."""
        f = self._coerce(values)
        inv = el.inverse().perm_array()
        return f[inv]

    def apply_label(self, label: str, values: np.ndarray) -> np.ndarray:
        f = self._coerce(values)
        inv = self.action.perms[self.action.gens.inverse_label(label)]
        return f[inv]

    def random_field(self, rng: np.random.Generator, mean_zero: bool = False) -> np.ndarray:
        f = rng.standard_normal((self.n_points, self.d))
        if mean_zero:
            f = Decomposition(self).complement(f)
        return f


class VectorField:
    """A field over the action space with its norm cached on first use."""

    def __init__(self, rep: Representation, values: np.ndarray) -> None:
        self.rep = rep
        self.values = rep._coerce(values)
        self._norm: Optional[float] = None

    @property
    def norm(self) -> float:
        if self._norm is None:
            self._norm = self.rep.norm(self.values)
        return self._norm


class Decomposition:
    """Projections onto invariant fields and their mean-zero complement."""

    def __init__(self, rep: Representation) -> None:
        self.rep = rep
        action = rep.action
        self.orbit_of = action.orbit_index()
        self.n_orbits = len(action.orbits())
        self.orbit_mass = np.zeros(self.n_orbits)
        np.add.at(self.orbit_mass, self.orbit_of, action.weights)

    def mean(self, values: np.ndarray) -> np.ndarray:
        """Weighted mean on each orbit, broadcast back as an invariant field."""
        f = self.rep._coerce(values)
        w = self.rep.action.weights
        sums = np.zeros((self.n_orbits, f.shape[1]))
        np.add.at(sums, self.orbit_of, w[:, None] * f)
        means = sums / self.orbit_mass[:, None]
        return means[self.orbit_of]

    def complement(self, values: np.ndarray) -> np.ndarray:
        f = self.rep._coerce(values)
        return f - self.mean(f)

    def complement_dim(self) -> int:
        return self.rep.n_points - self.n_orbits

    def mean_matrix(self) -> np.ndarray:
        n = self.rep.n_points
        if n > DENSE_LIMIT:
            raise ValueError(f"refusing dense {n} x {n} projector")
        w = self.rep.action.weights
        out = np.zeros((n, n))
        for orb in self.rep.action.orbits():
            mass = float(w[orb].sum())
            out[np.ix_(orb, orb)] = w[orb][None, :] / mass
        return out


@dataclass
class NormEstimate:
    """Restricted operator norm with its certification quality."""

    value: float
    quality: str  # "exact" (p = 2) or "lower_bound"
    p: float
    upper: float = 1.0
    iterations: int = 0
    converged: bool = True


class MarkovOperator:
    """Averaging operator A f(x) = sum_g mu(g) f(g^-1 x), stored sparsely."""

    def __init__(self, rep: Representation, measure: DiscreteMeasure) -> None:
        if measure.degree != rep.n_points:
            raise ValueError("measure atoms are not realized on the action space")
        self.rep = rep
        self.measure = measure
        self._terms: List[Tuple[np.ndarray, np.ndarray, float]] = []
        for el, w in measure.items():
            perm = el.perm_array()
            inv = np.empty_like(perm)
            inv[perm] = np.arange(len(perm))
            self._terms.append((inv, perm, float(w)))
        self.decomposition = Decomposition(rep)

    @property
    def n_points(self) -> int:
        return self.rep.n_points

    def apply(self, values: np.ndarray) -> np.ndarray:
        f = self.rep._coerce(values)
        out = np.zeros_like(f)
        for inv, _perm, w in self._terms:
            out += w * f[inv]
        return out

    def apply_transpose(self, values: np.ndarray) -> np.ndarray:
        """Adjoint for the weighted pairing; same array op as the plain transpose."""
        f = self.rep._coerce(values)
        out = np.zeros_like(f)
        for _inv, perm, w in self._terms:
            out += w * f[perm]
        return out

    def apply_power(self, values: np.ndarray, k: int) -> np.ndarray:
        f = self.rep._coerce(values)
        for _ in range(k):
            f = self.apply(f)
        return f

    def dense(self) -> np.ndarray:
        n = self.n_points
        if n > DENSE_LIMIT:
            raise ValueError(f"refusing dense {n} x {n} operator")
        a = np.zeros((n, n))
        rows = np.arange(n)
        for inv, _perm, w in self._terms:
            np.add.at(a, (rows, inv), w)
        return a

    def row_sums(self) -> np.ndarray:
        return np.full(self.n_points, sum(w for _, _, w in self._terms))

    def to_coo(self) -> List[Tuple[int, int, float]]:
        """Coordinate-list export of the sparse action table."""
        entries: Dict[Tuple[int, int], float] = {}
        for inv, _perm, w in self._terms:
            for i in range(self.n_points):
                key = (i, int(inv[i]))
                entries[key] = entries.get(key, 0.0) + w
        return [(i, j, v) for (i, j), v in sorted(entries.items())]


def markov_operator(rep: Representation, mu: DiscreteMeasure) -> MarkovOperator:
    return MarkovOperator(rep, mu)


# -- restricted norm ---------------------------------------------------------


def _weighted_inner(weights: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum(weights[:, None] * u * v))


def _power_iteration_l2(op: MarkovOperator, seed: int, tol: float, max_iter: int
                        ) -> Tuple[float, int, bool]:
    """Largest singular value of A restricted to the mean-zero complement.

    Power iteration on (Pc A^T A Pc) in the weighted inner product, with the
    invariant directions deflated each step.
    """
    dec = op.decomposition
    rep = op.rep
    w = rep.action.weights
    if dec.complement_dim() == 0:
        return 0.0, 0, True
    best = 0.0
    iterations = 0
    converged = True
    for start in range(2):
        rng = np.random.default_rng(seed + 101 * start)
        v = dec.complement(rng.standard_normal((rep.n_points, rep.d)))
        nrm = np.sqrt(_weighted_inner(w, v, v))
        if nrm == 0.0:
            continue
        v /= nrm
        rayleigh_old = np.inf
        ok = False
        for it in range(1, max_iter + 1):
            av = op.apply(v)
            u = dec.complement(op.apply_transpose(av))
            rayleigh = _weighted_inner(w, v, u)
            if abs(rayleigh - rayleigh_old) < tol:
                iterations += it
                ok = True
                break
            rayleigh_old = rayleigh
            nrm = np.sqrt(_weighted_inner(w, u, u))
            if nrm < 1e-300:
                rayleigh = max(rayleigh, 0.0)
                iterations += it
                ok = True
                break
            v = u / nrm
        if not ok:
            iterations += max_iter
            converged = False
        best = max(best, float(np.sqrt(max(rayleigh, 0.0))))
    return best, iterations, converged


def _lp_norm_and_grad(rep: Representation, f: np.ndarray) -> Tuple[float, np.ndarray]:
    p = rep.p
    w = rep.action.weights[:, None]
    nrm = rep.norm(f)
    if nrm == 0.0:
        return 0.0, np.zeros_like(f)
    grad = w * np.abs(f) ** (p - 1.0) * np.sign(f) * nrm ** (1.0 - p)
    return nrm, grad


def _lp_ascent(op: MarkovOperator, f0: np.ndarray, max_iter: int = 400) -> float:
    """Projected gradient ascent of |A f|_p / |f|_p over mean-zero fields."""
    dec = op.decomposition
    rep = op.rep
    f = dec.complement(f0)
    nf = rep.norm(f)
    if nf == 0.0:
        return 0.0
    f /= nf
    ratio = 0.0
    step = 1.0
    for _ in range(max_iter):
        af = op.apply(f)
        naf, gaf = _lp_norm_and_grad(rep, af)
        nf, gf = _lp_norm_and_grad(rep, f)
        ratio = naf / nf
        if naf == 0.0:
            break
        grad = dec.complement(op.apply_transpose(gaf) / naf - gf / nf)
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < 1e-13:
            break
        improved = False
        while step > 1e-12:
            cand = dec.complement(f + step * grad)
            ncand = rep.norm(cand)
            if ncand > 0:
                cand = cand / ncand
                r_cand = rep.norm(op.apply(cand)) / rep.norm(cand)
                if r_cand > ratio + 1e-15:
                    f = cand
                    ratio = r_cand
                    improved = True
                    step *= 1.5
                    break
            step *= 0.5
        if not improved:
            break
    return float(ratio)


def restricted_norm(op: MarkovOperator, seed: int = 0, n_starts: int = 8,
                    tol: float = 1e-13, max_iter: int = 100_000) -> NormEstimate:
    """Norm of the averaging operator restricted to the mean-zero complement.

    p = 2: exact largest singular value by power iteration with deflation of
    the invariant fields.  The stopping rule watches the Rayleigh quotient;
    the default is tighter than the guaranteed 1e-10 so that k-th powers of
    the result stay accurate.  p != 2: a certified lower bound from
    multi-start projected gradient ascent (paired with the trivial upper
    bound 1); the starts include the p = 2 singular direction, whose ratio
    already equals the spectral radius for symmetric operators.
    """
    rep = op.rep
    if op.decomposition.complement_dim() == 0:
        return NormEstimate(value=0.0, quality="exact", p=rep.p, upper=0.0)
    if rep.p == 2.0:
        value, iterations, converged = _power_iteration_l2(op, seed, tol, max_iter)
        if not converged:
            warnings.warn("power iteration hit the iteration cap", RuntimeWarning)
        return NormEstimate(value=value, quality="exact", p=2.0,
                            upper=value, iterations=iterations, converged=converged)
    # p != 2: ascent from seeded starts plus the l2 singular direction
    rep2 = Representation(rep.action, p=2.0, d=rep.d)
    op2 = MarkovOperator(rep2, op.measure)
    dec2 = op2.decomposition
    rng = np.random.default_rng(seed)
    v = dec2.complement(rng.standard_normal((rep.n_points, rep.d)))
    for _ in range(200):
        u = dec2.complement(op2.apply_transpose(op2.apply(v)))
        nrm = np.sqrt(_weighted_inner(rep.action.weights, u, u))
        if nrm < 1e-300:
            break
        v = u / nrm
    best = _lp_ascent(op, v)
    for start in range(n_starts):
        srng = np.random.default_rng(seed + 7919 * (start + 1))
        best = max(best, _lp_ascent(op, srng.standard_normal((rep.n_points, rep.d))))
    return NormEstimate(value=best, quality="lower_bound", p=rep.p, upper=1.0)


# -- projections -------------------------------------------------------------

NON_GAPPED = 1.0 - 1e-6


def neumann_projection(op: MarkovOperator, norm: Optional[NormEstimate] = None,
                       term_tol: float = 1e-14, max_terms: int = 500_000) -> np.ndarray:
    """P = I - (sum_n A^n)(I - A), truncated when the term norm drops below tol.

    Requires a restricted norm < 1; for gapped operators this reproduces the
    orbitwise mean projector.
    """
    lam = (norm or restricted_norm(op)).value
    if lam >= NON_GAPPED:
        raise ValueError(f"restricted norm {lam} >= {NON_GAPPED}: no spectral gap")
    a = op.dense()
    n = op.n_points
    term = np.eye(n) - a
    series = np.zeros_like(a)
    for _ in range(max_terms):
        series += term
        term = a @ term
        if np.linalg.norm(term, "fro") < term_tol:
            break
    else:
        raise RuntimeError("Neumann series failed to converge within max_terms")
    return np.eye(n) - series


@dataclass
class IterateResult:
    power: Optional[np.ndarray]
    defect: float
    k: int
    mode: str  # "operator-norm" or "sampled-ratio"


def iterate_to_projection(op: MarkovOperator, k: int, seed: int = 0,
                          n_samples: int = 16) -> IterateResult:
    """A^k and its distance to the limiting projection.

    p = 2: exact operator norm of A^k - P on a dense matrix.  Otherwise the
    defect is the sup of |A^k f - P f|_p / |f|_p over seeded sample fields.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    rep = op.rep
    if rep.p == 2.0 and op.n_points <= DENSE_LIMIT:
        a = op.dense()
        pmat = op.decomposition.mean_matrix()
        ak = np.linalg.matrix_power(a, k)
        defect = float(np.linalg.norm(_weighted_conjugate(rep, ak - pmat), 2))
        return IterateResult(power=ak, defect=defect, k=k, mode="operator-norm")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        f = rng.standard_normal((rep.n_points, rep.d))
        residual = op.apply_power(f, k) - op.decomposition.mean(f)
        worst = max(worst, rep.norm(residual) / rep.norm(f))
    return IterateResult(power=None, defect=worst, k=k, mode="sampled-ratio")


def _weighted_conjugate(rep: Representation, mat: np.ndarray) -> np.ndarray:
    """Conjugate by sqrt(weights) so the Euclidean 2-norm is the weighted one."""
    sw = np.sqrt(rep.action.weights)
    return mat * (sw[:, None] / sw[None, :])


# -- operator identities -----------------------------------------------------


@dataclass
class IdentityReport:
    convolution_defect: float
    translation_defect: float
    identity_on_invariants_defect: float
    complement_invariance_defect: float
    tol: float = 1e-12

    @property
    def ok(self) -> bool:
        return max(
            self.convolution_defect,
            self.translation_defect,
            self.identity_on_invariants_defect,
            self.complement_invariance_defect,
        ) <= self.tol

    def violations(self) -> List[str]:
        out = []
        for name in (
            "convolution_defect",
            "translation_defect",
            "identity_on_invariants_defect",
            "complement_invariance_defect",
        ):
            if getattr(self, name) > self.tol:
                out.append(name)
        return out


def operator_identities_check(rep: Representation, mu: DiscreteMeasure,
                              nu: DiscreteMeasure) -> IdentityReport:
    """Verify the algebra of averaging operators entrywise.

    Checks A^(mu*nu) = A^mu A^nu, pi_g A^mu = A^(g.mu) over the generators
    and supp(mu), A^mu = I on invariant fields, and preservation of the
    mean-zero complement.
    """
    op_mu = MarkovOperator(rep, mu)
    op_nu = MarkovOperator(rep, nu)
    a_mu = op_mu.dense()
    a_nu = op_nu.dense()
    a_conv = MarkovOperator(rep, convolve(mu, nu)).dense()
    conv_defect = float(np.max(np.abs(a_conv - a_mu @ a_nu)))

    trans_defect = 0.0
    gens = [rep.action.generator_element(lab) for lab in rep.action.gens.labels]
    for g in gens + mu.support:
        pg = _element_matrix(rep, g)
        translated = MarkovOperator(rep, translate(g, mu)).dense()
        trans_defect = max(trans_defect, float(np.max(np.abs(pg @ a_mu - translated))))

    dec = op_mu.decomposition
    rng = np.random.default_rng(12345)
    inv_defect = 0.0
    comp_defect = 0.0
    for _ in range(8):
        f = rng.standard_normal((rep.n_points, rep.d))
        invariant = dec.mean(f)
        inv_defect = max(inv_defect, float(np.max(np.abs(op_mu.apply(invariant) - invariant))))
        mean_zero = dec.complement(f)
        comp_defect = max(
            comp_defect, float(np.max(np.abs(dec.mean(op_mu.apply(mean_zero)))))
        )
    return IdentityReport(
        convolution_defect=conv_defect,
        translation_defect=trans_defect,
        identity_on_invariants_defect=inv_defect,
        complement_invariance_defect=comp_defect,
    )


def _element_matrix(rep: Representation, el: GroupElement) -> np.ndarray:
    n = rep.n_points
    mat = np.zeros((n, n))
    inv = el.inverse().perm_array()
    mat[np.arange(n), inv] = 1.0
    return mat
