"""Vinberg algebra over a poset with one-dimensional off-diagonal spaces.

Elements are dense square arrays laid out in the poset's linear extension.
The product is the ordinary matrix product projected back onto the
structural mask: a_{i mu} b_{mu j} is sent to zero whenever i and j are
unrelated.  The involution is the transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poset import Poset

AXIOM_TOL = 1e-10


class PosetMismatch(ValueError):
    pass


class StructuralZeroError(ValueError):
    """A nonzero value sits at a pair of unrelated elements."""

    def __init__(self, i: str, j: str, value: float):
        self.pair = (i, j)
        super().__init__(f"entry ({i}, {j}) = {value!r} but {i} and {j} are unrelated")


def vmul(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Masked product on raw arrays; broadcasts over leading batch axes."""
    return np.matmul(a, b) * mask


def vtrace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def pair_trace(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``tr(a b)`` for structured a, b without forming the product."""
    return np.einsum("...ij,...ji->...", a, b)


@dataclass(frozen=True, eq=False)
class StructuredMatrix:
    poset: Poset
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        n = len(self.poset)
        if arr.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {arr.shape}")
        bad = np.argwhere((arr != 0) & ~self.poset.mask)
        if len(bad):
            i, j = bad[0]
            labs = self.poset.labels
            raise StructuralZeroError(labs[i], labs[j], float(arr[i, j]))
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    # constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, poset: Poset) -> "StructuredMatrix":
        return cls(poset, np.zeros((len(poset),) * 2))

    @classmethod
    def unit(cls, poset: Poset) -> "StructuredMatrix":
        return cls(poset, np.eye(len(poset)))

    @classmethod
    def diag(cls, poset: Poset, values) -> "StructuredMatrix":
        return cls(poset, np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def from_labeled(cls, poset: Poset, entries: dict, symmetric: bool = False) -> "StructuredMatrix":
        """Build from ``{(i, j): value}`` keyed by labels."""
        arr = np.zeros((len(poset),) * 2)
        for (i, j), v in entries.items():
            a, b = poset.index(i), poset.index(j)
            arr[a, b] = v
            if symmetric:
                arr[b, a] = v
        return cls(poset, arr)

    # element access -----------------------------------------------------

    def __getitem__(self, key) -> float:
        i, j = key
        return float(self.entries[self.poset.index(i), self.poset.index(j)])

    @property
    def n(self) -> int:
        return len(self.poset)

    # classification ------------------------------------------------------

    def is_lower(self) -> bool:
        return not np.any(self.entries[~self.poset.lower_mask])

    def is_upper(self) -> bool:
        return not np.any(self.entries[~self.poset.lower_mask.T])

    def is_diagonal(self) -> bool:
        return not np.any(self.entries[~np.eye(self.n, dtype=bool)])

    def is_hermitian(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.entries - self.entries.T) <= tol))

    # algebra ---------------------------------------------------------------

    def _check(self, other: "StructuredMatrix"):
        if other.poset is not self.poset and other.poset != self.poset:
            raise PosetMismatch("operands live on different posets")

    def __matmul__(self, other: "StructuredMatrix") -> "StructuredMatrix":
        return multiply(self, other)

    def __add__(self, other: "StructuredMatrix") -> "StructuredMatrix":
        self._check(other)
        return StructuredMatrix(self.poset, self.entries + other.entries)

    def __sub__(self, other: "StructuredMatrix") -> "StructuredMatrix":
        self._check(other)
        return StructuredMatrix(self.poset, self.entries - other.entries)

    def __mul__(self, scalar: float) -> "StructuredMatrix":
        return StructuredMatrix(self.poset, self.entries * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "StructuredMatrix":
        return StructuredMatrix(self.poset, -self.entries)

    @property
    def star(self) -> "StructuredMatrix":
        return involution(self)

    def trace(self) -> float:
        return trace(self)

    def allclose(self, other: "StructuredMatrix", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.entries, other.entries, rtol=0, atol=atol))

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.n else 0.0


def multiply(a: StructuredMatrix, b: StructuredMatrix) -> StructuredMatrix:
    a._check(b)
    return StructuredMatrix(a.poset, vmul(a.entries, b.entries, a.poset.mask))


def involution(a: StructuredMatrix) -> StructuredMatrix:
    return StructuredMatrix(a.poset, a.entries.T)


def trace(a: StructuredMatrix) -> float:
    return float(np.trace(a.entries))


# ----------------------------------------------------------------------
# random elements

def random_element(poset: Poset, rng: np.random.Generator, kind: str = "full") -> np.ndarray:
    """Random structured array: ``full``, ``lower``, ``lower+`` or ``hermitian``."""
    n = len(poset)
    x = rng.standard_normal((n, n))
    if kind == "full":
        return x * poset.mask
    if kind == "lower":
        return x * poset.lower_mask
    if kind == "lower+":
        x = x * poset.lower_mask
        x[np.diag_indices(n)] = rng.uniform(0.5, 2.0, size=n)
        return x
    if kind == "hermitian":
        x = x * poset.mask
        return (x + x.T) / 2
    raise ValueError(kind)


# ----------------------------------------------------------------------
# axiom verification

AXIOMS = ("i", "ii", "iii", "iv", "v", "vi")


@dataclass
class AxiomResult:
    axiom: str
    identity: str
    max_residual: float
    passed: bool
    witness: dict | None = None


@dataclass
class AxiomReport:
    poset: Poset
    trials: int
    seed: int
    tol: float
    results: list[AxiomResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, axiom: str) -> AxiomResult:
        return next(r for r in self.results if r.axiom == axiom)

    def to_dict(self) -> dict:
        return {
            "poset": self.poset.to_dict(), "trials": self.trials, "seed": self.seed,
            "tol": self.tol, "passed": self.passed,
            "axioms": [
                {"axiom": r.axiom, "identity": r.identity, "max_residual": r.max_residual,
                 "passed": r.passed, "witness": r.witness}
                for r in self.results
            ],
        }


_IDENTITIES = {
    "i": "tr(A A*) > 0 for A != 0",
    "ii": "(A B)* = B* A*",
    "iii": "tr(A B) = tr(B A)",
    "iv": "tr(A (B C)) = tr((A B) C)",
    "v": "(S T) U = S (T U) on lower-triangular S, T, U",
    "vi": "T (U U*) = (T U) U* on lower-triangular T, U",
}


def verify_axioms(poset: Poset, trials: int = 100, seed: int = 0,
                  tol: float = AXIOM_TOL) -> AxiomReport:
    """Check the six Vinberg identities on random structured matrices.

    Residuals are measured relative to the larger max-norm of the two sides
    (or of ``A A*`` for axiom i).  Failures are reported, never raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    mask = poset.mask
    worst = {ax: (0.0, None) for ax in AXIOMS}

    def record(ax, lhs, rhs, operands):
        scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1.0)
        diff = np.abs(np.asarray(lhs) - np.asarray(rhs))
        r = float(np.max(diff)) / scale
        if r > worst[ax][0]:
            witness = {"operands": {k: v.tolist() for k, v in operands.items()}}
            if np.ndim(diff) == 2:
                i, j = np.unravel_index(np.argmax(diff), diff.shape)
                witness["entry"] = [poset.labels[i], poset.labels[j]]
            worst[ax] = (r, witness)

    for _ in range(trials):
        a, b, c = (random_element(poset, rng) for _ in range(3))
        s, t, u = (random_element(poset, rng, "lower") for _ in range(3))

        aa = vmul(a, a.T, mask)
        tr_aa = np.trace(aa)
        # axiom i: tr(AA*) > 0; residual is the shortfall below sum a_ij^2
        expected = float(np.sum(a * a))
        if tr_aa <= 0:
            worst["i"] = (np.inf, {"operands": {"A": a.tolist()}})
        else:
            record("i", tr_aa, expected, {"A": a})

        record("ii", vmul(a, b, mask).T, vmul(b.T, a.T, mask), {"A": a, "B": b})
        record("iii", np.trace(vmul(a, b, mask)), np.trace(vmul(b, a, mask)), {"A": a, "B": b})
        record("iv", np.trace(vmul(a, vmul(b, c, mask), mask)),
               np.trace(vmul(vmul(a, b, mask), c, mask)), {"A": a, "B": b, "C": c})
        record("v", vmul(vmul(s, t, mask), u, mask), vmul(s, vmul(t, u, mask), mask),
               {"S": s, "T": t, "U": u})
        record("vi", vmul(t, vmul(u, u.T, mask), mask), vmul(vmul(t, u, mask), u.T, mask),
               {"T": t, "U": u})

    results = []
    for ax in AXIOMS:
        r, w = worst[ax]
        ok = r < tol
        results.append(AxiomResult(ax, _IDENTITIES[ax], r, ok, None if ok else w))
    return AxiomReport(poset, trials, seed, tol, results)


def axiom_vi_discrepancy(t: np.ndarray, u: np.ndarray, poset: Poset) -> np.ndarray:
    """Entrywise ``(T U) U* - T (U U*)`` under the masked product."""
    mask = poset.mask
    return vmul(vmul(t, u, mask), u.T, mask) - vmul(t, vmul(u, u.T, mask), mask)


# ----------------------------------------------------------------------
# sources and the ordinary product

def is_standard_mult_equivalent(poset: Poset) -> bool:
    """Whether ``T T*`` equals the ordinary product for every lower-triangular T.

    A masked entry of ``T T*`` at unrelated (i, j) collects t_ik t_jk over
    common lower bounds k, so the products agree exactly when no element sits
    below two incomparable elements, i.e. no element of the Hasse diagram has
    two children.  On posets whose branch points all have in-degree 0 this is
    the same as having no source.
    """
    return not poset.branch_points()


def standard_product_mismatch(poset: Poset, trials: int = 200, seed: int = 0) -> float:
    """Largest ``|T T* - T.T*|`` over random T with positive diagonal."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        t = random_element(poset, rng, "lower+")
        plain = t @ t.T
        worst = max(worst, float(np.max(np.abs(plain - plain * poset.mask))))
    return worst
