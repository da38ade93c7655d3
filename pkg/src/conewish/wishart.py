"""Wishart distributions HW_{chi, sigma} on the cone of a poset.

The density with respect to Lebesgue measure on the free coordinates
x_ii, x_ij (j < i) is

    pi^{(|I| - n..)/2} prod lambda_i^lambda_i prod x_[i]^(lambda_i - n_i)
    --------------------------------------------------------------- exp(-tr(sigma^{-chi} X))
         prod Gamma(lambda_i - n_i./2) prod sigma_[i]^lambda_i

and the standard member sigma = e^chi = diag(lambda) has a lower factor
with independent entries: t_ii^2 ~ Gamma(lambda_i - n_i./2, rate 1) and
t_ij ~ Normal(0, 1/2).  Every other member is the image of the standard one
under pi(T_sigma diag(lambda)^{-1/2}).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from . import rng as rngmod
from .algebra import StructuredMatrix, pair_trace
from .cone import (ConePoint, DualPoint, chi_inverse, dual_lower_factor, gram, inv_lower,
                   lower_factor, theta_chi_lower)
from .poset import Poset


class InvalidMultiplier(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Shape vector (lambda_i) in the poset's index order."""

    poset: Poset
    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        if lam.shape != (len(self.poset),):
            raise InvalidMultiplier(f"need {len(self.poset)} values, got {lam.shape}")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidMultiplier("lambda values must be positive")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_labeled(cls, poset: Poset, values: dict) -> "Multiplier":
        return cls(poset, [values[lab] for lab in poset.labels])

    @classmethod
    def constant(cls, poset: Poset, value: float) -> "Multiplier":
        return cls(poset, np.full(len(poset), float(value)))

    def __getitem__(self, label) -> float:
        return float(self.lambdas[self.poset.index(label)])

    @property
    def bounds(self) -> np.ndarray:
        """Lower bounds n_i./2 defining the admissible set."""
        return self.poset.n_pred / 2

    @property
    def gamma_shapes(self) -> np.ndarray:
        return self.lambdas - self.bounds

    def violations(self) -> list[tuple[str, float, float]]:
        return [(lab, float(v), float(b))
                for lab, v, b in zip(self.poset.labels, self.lambdas, self.bounds) if v <= b]

    def is_valid(self) -> bool:
        return not self.violations()

    def validate(self) -> "Multiplier":
        bad = self.violations()
        if bad:
            msg = ", ".join(f"lambda_{lab} = {v:g} violates lambda_{lab} > {_frac(b)}"
                            for lab, v, b in bad)
            raise InvalidMultiplier(msg)
        return self

    def to_dict(self) -> dict:
        return {lab: float(v) for lab, v in zip(self.poset.labels, self.lambdas)}


def _frac(x: float) -> str:
    return str(Fraction(x).limit_denominator(4))


def admissible_constraints(poset: Poset) -> list[str]:
    """Human-readable constraints, e.g. ``['λ1>0', 'λ3>1', 'λ4>1/2']``."""
    return [f"λ{lab}>{_frac(b)}" for lab, b in zip(poset.labels, poset.n_pred / 2)]


def e_chi(chi: Multiplier) -> ConePoint:
    """e^chi = diag(lambda); its chi-inverse is the unit."""
    return ConePoint.from_lower(np.diag(np.sqrt(chi.lambdas)), chi.poset)


class WishartModel:
    """HW_{chi, sigma}; ``sigma=None`` gives the standard member sigma = e^chi."""

    def __init__(self, chi: Multiplier, sigma: ConePoint | None = None):
        chi.validate()
        self.chi = chi
        self.sigma = e_chi(chi) if sigma is None else sigma
        if self.sigma.poset != chi.poset:
            raise ValueError("sigma and chi live on different posets")
        self.poset.require_condition_F()

    @property
    def poset(self) -> Poset:
        return self.chi.poset

    @property
    def lambdas(self) -> np.ndarray:
        return self.chi.lambdas

    @cached_property
    def sigma_inv_chi(self) -> DualPoint:
        return chi_inverse(self.sigma, self.chi.lambdas)

    @cached_property
    def log_normalizer(self) -> float:
        p, lam = self.poset, self.lambdas
        n_dd = float(np.sum(p.n_half))
        return float(
            0.5 * (len(p) - n_dd) * np.log(np.pi)
            + np.sum(lam * np.log(lam))
            - np.sum(gammaln(self.chi.gamma_shapes))
            - np.sum(lam * np.log(self.sigma.generalized_powers()))
        )

    @cached_property
    def transform(self) -> np.ndarray:
        """Lower A with X = pi(A)(X_std): A = T_sigma diag(lambda)^{-1/2}."""
        return self.sigma.t / np.sqrt(self.lambdas)[None, :]

    @property
    def is_standard(self) -> bool:
        return bool(np.allclose(self.sigma.entries, np.diag(self.lambdas), rtol=0, atol=1e-14))

    # densities ---------------------------------------------------------

    def log_density_array(self, x: np.ndarray) -> np.ndarray:
        """Batched log density; every point must lie in the cone."""
        x = np.asarray(x, dtype=float)
        t = lower_factor(x, self.poset)
        gp = np.diagonal(t, axis1=-2, axis2=-1) ** 2
        expo = np.sum((self.lambdas - self.poset.n_half) * np.log(gp), axis=-1)
        return self.log_normalizer + expo - pair_trace(self.sigma_inv_chi.entries, x)

    def log_density(self, x) -> float:
        if isinstance(x, ConePoint):
            x = x.entries
        elif isinstance(x, StructuredMatrix):
            x = x.entries
        return float(self.log_density_array(x))

    def density(self, x) -> float:
        return float(np.exp(self.log_density(x)))

    # Laplace transform --------------------------------------------------

    def log_laplace(self, theta) -> float:
        """log E exp(-tr(theta X)), defined when theta + sigma^{-chi} is in the dual cone."""
        arr = _entries(theta)
        shifted = arr + self.sigma_inv_chi.entries
        z = dual_lower_factor(shifted, self.poset)  # raises NotInDualCone
        w = theta_chi_lower(z, self.lambdas)
        gp = np.diag(w) ** 2
        lam = self.lambdas
        return float(np.sum(lam * np.log(gp)) - np.sum(lam * np.log(self.sigma.generalized_powers())))

    def laplace(self, theta) -> float:
        return float(np.exp(self.log_laplace(theta)))

    # sampling ----------------------------------------------------------

    def sample_factors(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Lower factors T of draws X = T T*."""
        s = standard_factors(self.chi, rng, size)
        if self.is_standard:
            return s
        return self.transform @ s

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return ConePoint.from_lower(self.sample_factors(rng, 1)[0], self.poset)
        return gram(self.sample_factors(rng, size), self.poset)

    def draw_factors(self, n: int, seed: int, key: int = rngmod.KEY_X) -> np.ndarray:
        """n factors from the blocked (seed, key, block) streams."""
        return rngmod.blocked(seed, key, n, lambda g, s: self.sample_factors(g, s))

    def draw(self, n: int, seed: int, key: int = rngmod.KEY_X) -> np.ndarray:
        return gram(self.draw_factors(n, seed, key), self.poset)

    @cached_property
    def _rho(self) -> np.ndarray:
        return np.sqrt(self.lambdas)[:, None] * inv_lower(self.sigma.t)

    def standardize(self, x):
        """rho(X) with rho = pi(diag(lambda)^{1/2} T_sigma^{-1}); rho(X) is standard."""
        if isinstance(x, ConePoint):
            return ConePoint.from_lower(self._rho @ x.t, self.poset)
        return gram(self.standardize_factors(lower_factor(x, self.poset)), self.poset)

    def standardize_factors(self, t: np.ndarray) -> np.ndarray:
        """Lower factors of rho(X) from those of X; skips refactorizing near-boundary draws."""
        return self._rho @ t

    def mean(self) -> np.ndarray:
        """E[X], by differentiating the log Laplace transform at 0."""
        return self.sigma.entries.copy()


def _entries(theta) -> np.ndarray:
    if isinstance(theta, (DualPoint, StructuredMatrix)):
        return theta.entries
    return np.asarray(theta, dtype=float)


def standard_factors(chi: Multiplier, rng: np.random.Generator, size: int) -> np.ndarray:
    """Independent-entry lower factors of the standard member HW_{chi, e^chi}."""
    p = chi.poset
    n = len(p)
    chi.validate()
    t = np.zeros((size, n, n))
    rows, cols = np.nonzero(np.tril(p.lower_mask, -1))
    if len(rows):
        t[:, rows, cols] = rng.normal(0.0, np.sqrt(0.5), size=(size, len(rows)))
    t[:, np.arange(n), np.arange(n)] = np.sqrt(rng.gamma(chi.gamma_shapes, 1.0, size=(size, n)))
    return t


def sample_standard(chi: Multiplier, rng: np.random.Generator, size: int | None = None):
    return WishartModel(chi).sample(rng, size)


def sample(m: WishartModel, rng: np.random.Generator, size: int | None = None):
    return m.sample(rng, size)


def standardize(x, m: WishartModel):
    return m.standardize(x)


def log_density(x, m: WishartModel) -> float:
    return m.log_density(x)


def laplace_transform(theta, m: WishartModel) -> float:
    return m.laplace(theta)


def empirical_laplace(xs: np.ndarray, theta) -> tuple[float, float]:
    """Monte-Carlo mean of exp(-tr(theta X)) and its standard error."""
    vals = np.exp(-pair_trace(_entries(theta), xs))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


def random_dual_point(poset: Poset, rng: np.random.Generator, scale: float = 0.3) -> DualPoint:
    """theta = Z* Z for a random lower Z with positive diagonal, scaled down."""
    n = len(poset)
    z = rng.standard_normal((n, n)) * poset.lower_mask * 0.5
    z[np.diag_indices(n)] = rng.uniform(0.5, 1.5, size=n)
    return DualPoint.from_lower(z * np.sqrt(scale), poset)


def random_cone_point(poset: Poset, rng: np.random.Generator) -> ConePoint:
    n = len(poset)
    t = rng.standard_normal((n, n)) * poset.lower_mask
    t[np.diag_indices(n)] = rng.uniform(0.5, 2.0, size=n)
    return ConePoint.from_lower(t, poset)
