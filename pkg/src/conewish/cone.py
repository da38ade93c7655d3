"""The homogeneous cone P = {T T*} of a Vinberg algebra and its dual.

Array-level routines (``ldl``, ``lower_factor``, ``inv_lower`` ...) accept
leading batch axes and are what the sampler and the Monte-Carlo harness
use.  ``ConePoint`` / ``DualPoint`` wrap single points with cached factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import StructuredMatrix, vmul
from .poset import Poset

CONE_TOL = 1e-12


class NotInCone(ValueError):
    def __init__(self, label: str, pivot: float, dual: bool = False):
        self.label = label
        self.pivot = pivot
        what = "dual cone" if dual else "cone"
        super().__init__(f"not in the {what}: pivot at {label} is {pivot:.6g}")


class NotInDualCone(NotInCone):
    def __init__(self, label: str, pivot: float):
        super().__init__(label, pivot, dual=True)


# ----------------------------------------------------------------------
# array-level kernels

def ldl(x: np.ndarray, allowed: np.ndarray, tol: float = CONE_TOL):
    """Masked LDL* of (batched) symmetric ``x``.

    ``allowed[i, j]`` (i > j) marks the entries of the unit lower factor that
    may be nonzero.  Returns ``(L, d, bad)`` where ``bad`` is the first index
    whose pivot fell below ``tol * max(diag x)``, or ``None``.  Entries of x
    outside ``allowed | allowed.T`` are ignored.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    batch = x.shape[:-2]
    L = np.zeros(x.shape)
    d = np.zeros(batch + (n,))
    diag = np.diagonal(x, axis1=-2, axis2=-1)
    scale = np.max(diag, axis=-1) if n else np.zeros(batch)
    scale = np.where(scale > 0, scale, 1.0)
    for j in range(n):
        lj = L[..., j, :j]
        dj = x[..., j, j] - np.sum(lj * lj * d[..., :j], axis=-1)
        if np.any(~(dj > tol * scale)):
            return L, d, j
        d[..., j] = dj
        L[..., j, j] = 1.0
        rows = np.flatnonzero(allowed[j + 1:, j]) + j + 1
        if len(rows):
            acc = np.sum(L[..., rows, :j] * (lj * d[..., :j])[..., None, :], axis=-1)
            L[..., rows, j] = (x[..., rows, j] - acc) / dj[..., None]
    return L, d, None


def lower_factor(x: np.ndarray, poset: Poset, tol: float = CONE_TOL) -> np.ndarray:
    """T with positive diagonal such that x = T T* (masked); raises NotInCone."""
    L, d, bad = ldl(x, poset.lower_mask, tol)
    if bad is not None:
        raise NotInCone(poset.labels[bad], float(np.min(_pivot(x, L, d, bad))))
    return L * np.sqrt(d)[..., None, :]


def dual_lower_factor(theta: np.ndarray, poset: Poset, tol: float = CONE_TOL) -> np.ndarray:
    """Z with positive diagonal such that theta = Z* Z (masked); raises NotInDualCone.

    This is the generalized Cholesky factorization for the opposite order,
    run on the index-reversed array.
    """
    flipped = np.asarray(theta, dtype=float)[..., ::-1, ::-1]
    allowed = poset.leq[::-1, ::-1]
    L, d, bad = ldl(flipped, allowed, tol)
    if bad is not None:
        label = poset.labels[len(poset) - 1 - bad]
        raise NotInDualCone(label, float(np.min(_pivot(flipped, L, d, bad))))
    upper = (L * np.sqrt(d)[..., None, :])[..., ::-1, ::-1]
    return np.swapaxes(upper, -1, -2)


def _pivot(x, L, d, j):
    lj = L[..., j, :j]
    return x[..., j, j] - np.sum(lj * lj * d[..., :j], axis=-1)


def inv_lower(t: np.ndarray) -> np.ndarray:
    """Inverse of (batched) lower-triangular t by forward substitution."""
    t = np.asarray(t, dtype=float)
    n = t.shape[-1]
    out = np.zeros(t.shape)
    for i in range(n):
        rhs = np.zeros(t.shape[:-2] + (n,))
        rhs[..., i] = 1.0
        if i:
            rhs -= np.einsum("...k,...kc->...c", t[..., i, :i], out[..., :i, :])
        out[..., i, :] = rhs / t[..., i, i][..., None]
    return out


def gram(t: np.ndarray, poset: Poset) -> np.ndarray:
    """T T* under the masked product."""
    return vmul(t, np.swapaxes(t, -1, -2), poset.mask)


def dual_gram(z: np.ndarray, poset: Poset) -> np.ndarray:
    """Z* Z under the masked product."""
    return vmul(np.swapaxes(z, -1, -2), z, poset.mask)


def chi_inverse_lower(t_sigma: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Factor R of sigma^{-chi} = R* R, given sigma = Z Z* with Z = t_sigma."""
    return np.sqrt(lam)[:, None] * inv_lower(t_sigma)


def theta_chi_lower(z_theta: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Factor W of theta^chi = W W*, given theta = Z* Z with Z = z_theta."""
    return inv_lower(z_theta) * np.sqrt(lam)[None, :]


# ----------------------------------------------------------------------
# point types

@dataclass(frozen=True, eq=False)
class TriangularFactor:
    """Unit lower-triangular T1 and positive diagonal d with X = T1 D T1*."""

    poset: Poset
    unit_lower: np.ndarray = field(repr=False)
    diag: np.ndarray

    @property
    def t(self) -> np.ndarray:
        """The factor T = T1 sqrt(D) in T_l^+."""
        return self.unit_lower * np.sqrt(self.diag)[None, :]

    def compose(self) -> StructuredMatrix:
        return StructuredMatrix(self.poset, gram(self.t, self.poset))

    def labeled(self) -> dict:
        labs = self.poset.labels
        lower = {f"{labs[i]},{labs[j]}": float(self.unit_lower[i, j])
                 for i, j in zip(*np.nonzero(np.tril(self.poset.lower_mask, -1)))}
        return {"D": {labs[i]: float(v) for i, v in enumerate(self.diag)}, "T1": lower}


def decompose(x, poset: Poset | None = None, order: Sequence | None = None,
              tol: float = CONE_TOL) -> TriangularFactor:
    """Unique X = T1 D T1* factorization by elimination along a linear extension.

    ``order`` optionally gives another linear extension (labels) to eliminate
    along; the result is mapped back to the poset's own layout.
    """
    if isinstance(x, StructuredMatrix):
        poset, arr = x.poset, x.entries
    else:
        arr = np.asarray(x, dtype=float)
    poset.require_condition_F()
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(arr)))):
        raise ValueError("matrix is not Hermitian")
    perm = np.arange(len(poset)) if order is None else np.array([poset.index(o) for o in order])
    if order is not None and not _is_linear_extension(poset, perm):
        raise ValueError("order is not a linear extension of the poset")
    allowed = poset.lower_mask[np.ix_(perm, perm)]
    L, d, bad = ldl(arr[np.ix_(perm, perm)], allowed, tol)
    if bad is not None:
        raise NotInCone(poset.labels[perm[bad]], float(_pivot(arr[np.ix_(perm, perm)], L, d, bad)))
    inv = np.argsort(perm)
    return TriangularFactor(poset, L[np.ix_(inv, inv)], d[inv])


def _is_linear_extension(poset: Poset, perm: np.ndarray) -> bool:
    if sorted(perm.tolist()) != list(range(len(poset))):
        return False
    lt = poset.lt[np.ix_(perm, perm)]
    return not np.any(np.tril(lt))


class ConePoint:
    """A point X = T T* of the cone with its cached factorization."""

    def __init__(self, matrix: StructuredMatrix, factor: TriangularFactor):
        self.matrix = matrix
        self.factor = factor

    @classmethod
    def from_matrix(cls, x, poset: Poset | None = None, tol: float = CONE_TOL) -> "ConePoint":
        if not isinstance(x, StructuredMatrix):
            x = StructuredMatrix(poset, x)
        return cls(x, decompose(x, tol=tol))

    @classmethod
    def from_lower(cls, t, poset: Poset) -> "ConePoint":
        t = np.asarray(t, dtype=float)
        if np.any(t[~poset.lower_mask]) or np.any(np.diag(t) <= 0):
            raise ValueError("factor must be lower triangular with positive diagonal")
        dg = np.diag(t).copy()
        factor = TriangularFactor(poset, t / dg[None, :], dg ** 2)
        return cls(StructuredMatrix(poset, gram(t, poset)), factor)

    @classmethod
    def unit(cls, poset: Poset) -> "ConePoint":
        return cls.from_lower(np.eye(len(poset)), poset)

    @property
    def poset(self) -> Poset:
        return self.matrix.poset

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries

    @property
    def t(self) -> np.ndarray:
        return self.factor.t

    def generalized_powers(self) -> np.ndarray:
        return self.factor.diag.copy()

    def generalized_power(self, label) -> float:
        return float(self.factor.diag[self.poset.index(label)])

    def __repr__(self) -> str:
        return f"ConePoint({self.poset!r}, diag={np.round(self.factor.diag, 6).tolist()})"


class DualPoint:
    """A point theta = Z* Z of the dual cone."""

    def __init__(self, matrix: StructuredMatrix, z: np.ndarray):
        self.matrix = matrix
        self.z = z

    @classmethod
    def from_matrix(cls, theta, poset: Poset | None = None, tol: float = CONE_TOL) -> "DualPoint":
        if not isinstance(theta, StructuredMatrix):
            theta = StructuredMatrix(poset, theta)
        poset = theta.poset
        poset.require_condition_F()
        return cls(theta, dual_lower_factor(theta.entries, poset, tol))

    @classmethod
    def from_lower(cls, z, poset: Poset) -> "DualPoint":
        z = np.asarray(z, dtype=float)
        return cls(StructuredMatrix(poset, dual_gram(z, poset)), z)

    @property
    def poset(self) -> Poset:
        return self.matrix.poset

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries


def generalized_power(x: ConePoint, label) -> float:
    return x.generalized_power(label)


def minor_ratio(x, label) -> tuple[float, float]:
    """``(det X_{<=v}, det X_{<v})`` from ordinary principal minors over down-sets."""
    if isinstance(x, ConePoint):
        x = x.matrix
    p = x.poset
    v = p.index(label)
    down = np.flatnonzero(p.leq[:, v])
    strict = down[down != v]
    full = float(np.linalg.det(x.entries[np.ix_(down, down)]))
    part = float(np.linalg.det(x.entries[np.ix_(strict, strict)])) if len(strict) else 1.0
    return full, part


# ----------------------------------------------------------------------
# group action and division algorithm

def pi_action(t, x: ConePoint) -> ConePoint:
    """pi(T)(X) = (T W)(W* T*) for X = W W*."""
    t = np.asarray(t.entries if isinstance(t, StructuredMatrix) else t, dtype=float)
    return ConePoint.from_lower(t @ x.t, x.poset)


@dataclass(frozen=True, eq=False)
class DivisionMap:
    """g(U) = pi(T^{-1}) for U = T T*; maps U to the unit."""

    poset: Poset
    inverse_lower: np.ndarray = field(repr=False)

    def __call__(self, x: ConePoint) -> ConePoint:
        return pi_action(self.inverse_lower, x)

    def apply_array(self, w: np.ndarray) -> np.ndarray:
        """Batched action on factors: returns the factor T^{-1} W of g(U)(W W*)."""
        return self.inverse_lower @ w


def division_algorithm(u: ConePoint) -> DivisionMap:
    return DivisionMap(u.poset, inv_lower(u.t))


# ----------------------------------------------------------------------
# chi-inverse maps

def _lam(lam, poset: Poset) -> np.ndarray:
    lam = np.asarray(getattr(lam, "lambdas", lam), dtype=float)
    if lam.shape != (len(poset),) or np.any(lam <= 0):
        raise ValueError("multiplier needs one positive value per element")
    return lam


def chi_inverse(sigma: ConePoint, lam) -> DualPoint:
    """sigma^{-chi} = (Z*)^{-1} diag(lambda) Z^{-1} for sigma = Z Z*."""
    lam = _lam(lam, sigma.poset)
    return DualPoint.from_lower(chi_inverse_lower(sigma.t, lam), sigma.poset)


def theta_chi(theta: DualPoint, lam) -> ConePoint:
    """theta^chi = Z^{-1} diag(lambda) (Z*)^{-1} for theta = Z* Z."""
    lam = _lam(lam, theta.poset)
    return ConePoint.from_lower(theta_chi_lower(theta.z, lam), theta.poset)


# ----------------------------------------------------------------------
# restriction to up-sets and the component decomposition

def up_set_lower(t: np.ndarray, poset: Poset, label) -> np.ndarray:
    """T_{i<=}: keep t_jk only when i <= j and i <= k (full-size, batched)."""
    keep = poset.leq[poset.index(label)]
    return t * np.outer(keep, keep)


def restrict(x, label):
    """Restriction to the sub-poset I_{i<=}.

    Accepts a ConePoint (returns a ConePoint on the sub-poset, the unit maps
    to the sub-unit) or a lower-triangular array paired with its poset as
    ``(t, poset)`` (returns the sub-array).
    """
    if isinstance(x, ConePoint):
        p = x.poset
        idx = np.flatnonzero(p.leq[p.index(label)])
        sub = p.subposet(p.labels[k] for k in idx)
        return ConePoint.from_lower(x.t[np.ix_(idx, idx)], sub)
    t, p = x
    idx = np.flatnonzero(p.leq[p.index(label)])
    return np.asarray(t)[..., idx[:, None], idx[None, :]]


def restriction_division(u: ConePoint, label) -> DivisionMap:
    """g_i(U_{i<=}) acting on the sub-cone of I_{i<=}."""
    return division_algorithm(restrict(u, label))


@dataclass(frozen=True)
class ComponentPlan:
    """Which up-set Gram matrices are added and subtracted for each component."""

    poset: Poset
    components: tuple[str, ...]            # elements of the minimal set union S
    plus: dict[str, str]                   # component -> its own up-set root
    minus: dict[str, tuple[str, ...]]      # component -> subtracted up-set roots

    def columns(self, label) -> frozenset[str]:
        """Columns k of T whose entries the component depends on."""
        p = self.poset
        keep = p.leq[p.index(self.plus[label])].copy()
        for s in self.minus[label]:
            keep &= ~p.leq[p.index(s)]
        return frozenset(p.labels[k] for k in np.flatnonzero(keep))

    def column_multiplicity(self) -> dict[str, int]:
        """How many times each column term t_ak t_bk is counted across components."""
        p = self.poset
        count = np.zeros(len(p), dtype=int)
        for c in self.components:
            count += p.leq[p.index(self.plus[c])]
            for s in self.minus[c]:
                count -= p.leq[p.index(s)]
        return dict(zip(p.labels, count.tolist()))


def component_plan(poset: Poset) -> ComponentPlan:
    seps = poset.separators()
    minimal = poset.minimal_elements()
    comps = [lab for lab in poset.labels if lab in minimal or lab in seps.minimal]
    minus = {}
    for c in comps:
        if c in minimal:
            minus[c] = tuple(sorted(seps.per_element[c], key=poset.index))
        else:
            minus[c] = ()
    return ComponentPlan(poset, tuple(comps), {c: c for c in comps}, minus)


def component_arrays(t: np.ndarray, poset: Poset, plan: ComponentPlan | None = None) -> dict:
    """Batched components Z_i from lower factors t of Z = T T*."""
    plan = plan or component_plan(poset)
    cache = {}

    def up_gram(label):
        if label not in cache:
            cache[label] = gram(up_set_lower(t, poset, label), poset)
        return cache[label]

    out = {}
    for c in plan.components:
        z = up_gram(plan.plus[c]).copy()
        for s in plan.minus[c]:
            z -= up_gram(s)
        out[c] = z
    return out


def component_decomposition(z: ConePoint) -> dict[str, StructuredMatrix]:
    """Components Z_i, i in minimal elements union S; they sum to Z."""
    comps = component_arrays(z.t, z.poset)
    return {k: StructuredMatrix(z.poset, v) for k, v in comps.items()}


def up_set_gram(z: ConePoint, label) -> StructuredMatrix:
    """Z_{i<=} = T_{i<=} T_{i<=}* as a full-size matrix."""
    return StructuredMatrix(z.poset, gram(up_set_lower(z.t, z.poset, label), z.poset))
