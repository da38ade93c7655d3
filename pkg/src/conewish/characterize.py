"""Monte-Carlo checks of the structure behind the Olkin-Rubin type characterization.

Each check returns a :class:`TestReport` carrying the raw statistics, so a
verdict can always be re-derived.  Reports marked ``expect="reject"`` are
negative controls: they pass when the null is rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import rng as rngmod
from .cone import ConePoint, component_arrays, component_plan, gram, inv_lower, lower_factor
from .poset import Poset
from .wishart import Multiplier, WishartModel, standard_factors

LEVEL = 0.01


class UnsupportedSubcone(ValueError):
    pass


@dataclass
class TestReport:
    __test__ = False  # keep pytest from collecting this class

    name: str
    verdict: bool
    n_draws: int
    seed: int
    level: float = LEVEL
    expect: str = "accept"          # "accept": null should hold, "reject": control
    statistics: dict = field(default_factory=dict)
    p_values: dict = field(default_factory=dict)
    notes: str = ""

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_text(self) -> str:
        tag = "SKIP" if self.expect == "skip" else ("PASS" if self.verdict else "FAIL")
        parts = [f"{k}={_fmt(v)}" for k, v in self.statistics.items() if np.isscalar(v)]
        if self.p_values:
            parts.append(f"min_p={_fmt(min(self.p_values.values()))}")
        line = f"{tag} {self.name} (n={self.n_draws}, seed={self.seed}) " + " ".join(parts)
        return line + (f"  # {self.notes}" if self.notes else "")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.4g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def reports_to_json(reports: Sequence[TestReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


# ----------------------------------------------------------------------
# statistics helpers

def lower_entries(poset: Poset) -> list[tuple[int, int]]:
    rows, cols = np.nonzero(poset.lower_mask)
    return list(zip(rows.tolist(), cols.tolist()))


def max_offdiag_corr(a: np.ndarray, b: np.ndarray | None = None) -> tuple[float, tuple[int, int]]:
    """Largest |corr| between distinct columns of a, or between columns of a and b."""
    if b is None:
        c = np.corrcoef(a, rowvar=False)
        c = np.atleast_2d(c)
        np.fill_diagonal(c, 0.0)
    else:
        za = (a - a.mean(0)) / a.std(0)
        zb = (b - b.mean(0)) / b.std(0)
        c = za.T @ zb / len(a)
    c = np.nan_to_num(c)
    if c.size == 0:
        return 0.0, (-1, -1)
    k = np.unravel_index(np.argmax(np.abs(c)), c.shape)
    return float(abs(c[k])), (int(k[0]), int(k[1]))


def _centered_distances(z: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.maximum(np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=-1), 0.0))
    return d - d.mean(0) - d.mean(1)[:, None] + d.mean()


def distance_correlation(a: np.ndarray, b: np.ndarray) -> float:
    A, B = _centered_distances(a), _centered_distances(b)
    dcov = np.mean(A * B)
    denom = np.sqrt(np.mean(A * A) * np.mean(B * B))
    return float(np.sqrt(max(dcov, 0.0) / denom)) if denom > 0 else 0.0


def dcor_permutation_test(a, b, n_perm: int, rng: np.random.Generator) -> tuple[float, float]:
    """Distance correlation and its permutation p-value."""
    A, B = _centered_distances(a), _centered_distances(b)
    denom = np.sqrt(np.mean(A * A) * np.mean(B * B))
    obs = np.mean(A * B)
    hits = 0
    for _ in range(n_perm):
        pi = rng.permutation(len(b))
        if np.mean(A * B[np.ix_(pi, pi)]) >= obs:
            hits += 1
    stat = float(np.sqrt(max(obs, 0.0) / denom)) if denom > 0 else 0.0
    return stat, (hits + 1) / (n_perm + 1)


def maxcorr_permutation_test(a, b, n_perm: int, rng: np.random.Generator) -> tuple[float, float]:
    obs, _ = max_offdiag_corr(a, b)
    za = (a - a.mean(0)) / a.std(0)
    zb = (b - b.mean(0)) / b.std(0)
    hits = 0
    for _ in range(n_perm):
        c = za.T @ zb[rng.permutation(len(zb))] / len(za)
        if np.max(np.abs(c)) >= obs:
            hits += 1
    return obs, (hits + 1) / (n_perm + 1)


def _standardize_cols(z):
    sd = z.std(0)
    sd[sd == 0] = 1.0
    return (z - z.mean(0)) / sd


def sqrt_gamma_variance(shape: float) -> float:
    """var(sqrt(G)) for G ~ Gamma(shape, 1)."""
    m = np.exp(gammaln(shape + 0.5) - gammaln(shape))
    return float(shape - m * m)


# ----------------------------------------------------------------------
# independent factor entries iff sigma = e^chi

def test_entry_independence(chi: Multiplier, n_draws: int = 10_000, seed: int = 0,
                            control_pair: tuple | None = None, control_strength: float = 0.8,
                            level: float = LEVEL) -> list[TestReport]:
    """Entry independence for the standard member plus a non-standard control.

    The control uses sigma = W W* with W = (e + c E_jk) diag(lambda)^{1/2},
    so z = W diag(lambda)^{-1/2} has z_jk = c, z_kk = 1 and the predicted
    covariance is cov(t_jk, t_kk) = z_jk z_kk var(s_kk).
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    p = chi.poset
    entries = lower_entries(p)
    names = [f"t[{p.labels[i]},{p.labels[j]}]" for i, j in entries]
    model = WishartModel(chi)
    t = model.draw_factors(n_draws, seed)
    feats = np.stack([t[:, i, j] for i, j in entries], axis=1)
    bound = 4 / np.sqrt(n_draws)

    corr, (a, b) = max_offdiag_corr(feats) if len(entries) > 1 else (0.0, (-1, -1))
    pvals = {}
    for (i, j), name, col in zip(entries, names, feats.T):
        if i == j:
            pvals[name] = float(stats.kstest(col ** 2, stats.gamma(chi.gamma_shapes[i]).cdf).pvalue)
        else:
            pvals[name] = float(stats.kstest(col, stats.norm(0, np.sqrt(0.5)).cdf).pvalue)
    ks_ok = min(pvals.values()) > level / len(pvals)
    statistics = {"max_abs_corr": corr, "corr_bound": bound, "n_entries": len(entries)}
    if len(entries) > 1:
        statistics["max_pair"] = [names[a], names[b]]
    reports = [TestReport(
        "entry_independence[standard]", bool(corr < bound and ks_ok), n_draws, seed, level,
        statistics=statistics, p_values=pvals,
        notes="" if len(entries) > 1 else "single element: no pairs",
    )]

    strict = [(i, j) for i, j in entries if i != j]
    if not strict:
        return reports
    if control_pair is None:
        jj, kk = strict[0]
    else:
        jj, kk = p.index(control_pair[0]), p.index(control_pair[1])
        if not p.lt[kk, jj]:
            raise ValueError(f"control pair needs {control_pair[1]} < {control_pair[0]}")
    z = np.eye(len(p))
    z[jj, kk] = control_strength
    w = z * np.sqrt(chi.lambdas)[None, :]
    sigma = ConePoint.from_lower(w, p)
    tc = WishartModel(chi, sigma).draw_factors(n_draws, seed, key=rngmod.KEY_AUX)
    x1, x2 = tc[:, jj, kk], tc[:, kk, kk]
    r, pv = stats.pearsonr(x1, x2)
    predicted_cov = z[jj, kk] * z[kk, kk] * sqrt_gamma_variance(chi.gamma_shapes[kk])
    emp_cov = float(np.cov(x1, x2)[0, 1])
    prod = (x1 - x1.mean()) * (x2 - x2.mean())
    cov_se = float(prod.std(ddof=1) / np.sqrt(n_draws))
    sign_ok = np.sign(r) == np.sign(z[jj, kk] * z[kk, kk])
    lj, lk = p.labels[jj], p.labels[kk]
    reports.append(TestReport(
        f"entry_independence[control sigma_{lj}{lk}!=0]", bool(pv < level and sign_ok),
        n_draws, seed, level, expect="reject",
        statistics={"pair": [f"t[{lj},{lk}]", f"t[{lk},{lk}]"], "corr": float(r),
                    "empirical_cov": emp_cov, "predicted_cov": predicted_cov,
                    "cov_z": (emp_cov - predicted_cov) / cov_se, "sign_matches": bool(sign_ok)},
        p_values={"pearson": float(pv)},
    ))
    return reports


# ----------------------------------------------------------------------
# invariance of the quotient on sub-cones

def random_orthogonal(m: int, rng: np.random.Generator) -> np.ndarray:
    return stats.ortho_group.rvs(m, random_state=rng) if m > 1 else np.ones((1, 1))


def effective_shapes(chi: Multiplier, label) -> np.ndarray:
    """Gamma-law shape parameters seen by the sub-cone on I_{i<=}, shifted to its own indices.

    The standard factor restricted to I_{i<=} is standard for the sub-poset with
    lambda'_j = lambda_j - (n_j. - n'_j.)/2.  On a chain sub-cone the quotient is
    orthogonally invariant when these are all equal.
    """
    p = chi.poset
    idx = np.flatnonzero(p.leq[p.index(label)])
    sub = p.subposet(p.labels[k] for k in idx)
    return chi.lambdas[idx] - (p.n_pred[idx] - sub.n_pred) / 2


def quotient_samples(chi: Multiplier, chi_prime: Multiplier, label, n_draws: int, seed: int,
                     sigma_prime=None) -> np.ndarray:
    """V_{i<=} = g_i(X_{i<=} + Y_{i<=}) X_{i<=} on the sub-poset, batched."""
    p = chi.poset
    idx = np.flatnonzero(p.leq[p.index(label)])
    sub = p.subposet(p.labels[k] for k in idx)
    tx = WishartModel(chi).draw_factors(n_draws, seed, rngmod.KEY_X)[:, idx[:, None], idx[None, :]]
    ty = WishartModel(chi_prime, sigma_prime).draw_factors(n_draws, seed, rngmod.KEY_Y)
    ty = ty[:, idx[:, None], idx[None, :]]
    u = gram(tx, sub) + gram(ty, sub)
    return gram(inv_lower(lower_factor(u, sub)) @ tx, sub)


def _summaries(v: np.ndarray, sub: Poset) -> dict[str, np.ndarray]:
    m = v.shape[-1]
    out = {f"v[{j}{j}]": v[:, j, j] for j in range(m)}
    if m > 1:
        t = lower_factor(v, sub)
        for j in range(1, m):
            out[f"v_[{j}]"] = t[:, j, j] ** 2
        out["v[10]"] = v[:, 1, 0]
    return out


def test_quotient_invariance(chi: Multiplier, chi_prime: Multiplier, label, n_draws: int = 20_000,
                             seed: int = 0, transforms: Sequence[Callable] | None = None,
                             n_conjugations: int = 10, sigma_prime=None,
                             level: float = LEVEL) -> TestReport:
    """Two-sample KS comparison of V_{i<=} against k(V_{i<=}) for k fixing e_i.

    For a totally ordered I_{i<=} the k are random orthogonal conjugations;
    otherwise ``transforms`` (callables on batched arrays) must be given.
    Draws are split in half so the two samples are independent; p-values are
    judged against ``level`` divided by the number of comparisons.
    """
    p = chi.poset
    label = str(label)
    idx = np.flatnonzero(p.leq[p.index(label)])
    sub = p.subposet(p.labels[k] for k in idx)
    is_chain = bool(np.all(sub.mask))
    shapes = effective_shapes(chi, label)
    shapes_p = effective_shapes(chi_prime, label)
    name = f"quotient_invariance[{label}]" + ("[control]" if sigma_prime is not None else "")
    expect = "reject" if sigma_prime is not None else "accept"
    statistics = {"subposet": list(sub.labels), "effective_shapes": shapes.tolist(),
                  "effective_shapes_prime": shapes_p.tolist()}
    if len(idx) == 1:
        return TestReport(name, expect == "accept", n_draws, seed, level, expect=expect,
                          statistics=statistics, notes="singleton sub-cone: K_i is trivial")
    if not is_chain and transforms is None:
        raise UnsupportedSubcone(
            f"I_{{{label}<=}} = {{{', '.join(sub.labels)}}} is not totally ordered; "
            "supply explicit invariance transforms")

    v = quotient_samples(chi, chi_prime, label, n_draws, seed, sigma_prime)
    half = n_draws // 2
    va, vb = v[:half], v[half:2 * half]
    g = rngmod.stream(seed, rngmod.KEY_AUX, 7)
    if transforms is None:
        qs = [random_orthogonal(len(idx), g) for _ in range(n_conjugations)]
        transforms = [(lambda w, q=q: q @ w @ q.T) for q in qs]
    base = _summaries(va, sub)
    pvals = {}
    for c, k in enumerate(transforms):
        moved = _summaries(k(vb), sub)
        for key, col in base.items():
            pvals[f"k{c}:{key}"] = float(stats.ks_2samp(col, moved[key]).pvalue)
    threshold = level / len(pvals)
    rejected = min(pvals.values()) <= threshold
    statistics.update({"comparisons": len(pvals), "threshold": threshold})
    verdict = rejected if expect == "reject" else not rejected
    return TestReport(name, bool(verdict), n_draws, seed, level, expect=expect,
                      statistics=statistics, p_values=pvals)


# ----------------------------------------------------------------------
# U = X + Y independent of V = g(U)(X)

def _features(x: np.ndarray, poset: Poset) -> np.ndarray:
    return np.stack([x[:, i, j] for i, j in lower_entries(poset)], axis=1)


def test_UV_independence(chi: Multiplier, chi_prime: Multiplier, n_draws: int = 10_000,
                         seed: int = 0, control: bool = False, n_perm: int = 499,
                         dcor_n: int = 800, level: float = LEVEL) -> TestReport:
    """Permutation tests of U against V; with ``control=True`` V is replaced by X."""
    p = chi.poset
    tx = WishartModel(chi).draw_factors(n_draws, seed, rngmod.KEY_X)
    ty = WishartModel(chi_prime).draw_factors(n_draws, seed, rngmod.KEY_Y)
    x = gram(tx, p)
    u = x + gram(ty, p)
    v = x if control else gram(inv_lower(lower_factor(u, p)) @ tx, p)
    fu, fv = _features(u, p), _features(v, p)
    g = rngmod.stream(seed, rngmod.KEY_PERM)
    corr, p_corr = maxcorr_permutation_test(fu, fv, n_perm, g)
    m = min(dcor_n, n_draws)
    dc, p_dc = dcor_permutation_test(_standardize_cols(fu[:m]), _standardize_cols(fv[:m]), n_perm, g)
    pvals = {"max_corr_perm": p_corr, "dcor_perm": p_dc}
    rejected = min(pvals.values()) <= level / len(pvals)
    name = "UV_independence" + ("[control V=X]" if control else "")
    expect = "reject" if control else "accept"
    return TestReport(name, bool(rejected if control else not rejected), n_draws, seed, level,
                      expect=expect,
                      statistics={"max_abs_corr": corr, "dcor": dc, "dcor_n": m, "n_perm": n_perm},
                      p_values=pvals)


# ----------------------------------------------------------------------
# components depend on disjoint blocks of the factor

def _couple_columns(t: np.ndarray, plan, poset: Poset) -> np.ndarray:
    """Make two components' factor blocks dependent (negative control)."""
    comps = [c for c in plan.components if plan.columns(c)]
    a = poset.index(min(plan.columns(comps[0]), key=poset.index))
    b = poset.index(min(plan.columns(comps[1]), key=poset.index))
    t = t.copy()
    t[:, b, b] = t[:, a, a]
    return t


def test_component_consistency(chi: Multiplier, n_draws: int = 10_000, seed: int = 0,
                               control: bool = False, n_resample: int = 200,
                               level: float = LEVEL) -> TestReport:
    """Each X_i is a function of its own factor block, blocks partition the factor,
    and cross-component correlations stay below 4/sqrt(n)."""
    p = chi.poset
    plan = component_plan(p)
    name = "component_consistency" + ("[control coupled blocks]" if control else "")
    expect = "reject" if control else "accept"
    t = WishartModel(chi).draw_factors(n_draws, seed, rngmod.KEY_X)
    mult = plan.column_multiplicity()
    partition_ok = all(v == 1 for v in mult.values())
    x = gram(t, p)
    comps = component_arrays(t, p, plan)
    recon = float(np.max(np.abs(sum(comps.values()) - x)) / max(np.max(np.abs(x)), 1.0))

    g = rngmod.stream(seed, rngmod.KEY_AUX, 11)
    sub_t = t[:n_resample]
    fresh = WishartModel(chi).sample_factors(g, len(sub_t))
    dependence = {}
    for c in plan.components:
        cols = np.array([p.index(k) for k in plan.columns(c)], dtype=int)
        outside = np.ones(len(p), dtype=bool)
        outside[cols] = False
        mixed = sub_t.copy()
        mixed[:, :, outside] = fresh[:, :, outside]
        before = component_arrays(sub_t, p, plan)[c]
        after = component_arrays(mixed, p, plan)[c]
        dependence[c] = float(np.max(np.abs(after - before)))
    functional_ok = all(v <= 1e-12 * max(np.max(np.abs(x)), 1.0) for v in dependence.values())

    statistics = {"components": list(plan.components),
                  "columns": {c: sorted(plan.columns(c), key=p.index) for c in plan.components},
                  "column_multiplicity": mult, "reconstruction_residual": recon,
                  "max_change_after_resampling_outside": dependence}
    if len(plan.components) < 2:
        ok = partition_ok and functional_ok and recon < 1e-12
        return TestReport(name, ok if expect == "accept" else False, n_draws, seed, level,
                          expect=expect, statistics=statistics,
                          notes="single component: independence is vacuous")

    if control:
        t = _couple_columns(t, plan, p)
        comps = component_arrays(t, p, plan)
    feats, owner = [], []
    for c, z in comps.items():
        support = [(i, j) for i, j in lower_entries(p) if np.any(z[:64, i, j] != 0)]
        for i, j in support:
            feats.append(z[:, i, j])
            owner.append(c)
    feats = np.stack(feats, axis=1)
    owner = np.array(owner)
    c = np.corrcoef(feats, rowvar=False)
    cross = owner[:, None] != owner[None, :]
    worst = float(np.max(np.abs(c[cross])))
    bound = 4 / np.sqrt(n_draws)
    statistics.update({"max_cross_corr": worst, "corr_bound": bound})
    independent = worst < bound
    if control:
        verdict = not independent
    else:
        verdict = independent and partition_ok and functional_ok and recon < 1e-12
    return TestReport(name, bool(verdict), n_draws, seed, level, expect=expect,
                      statistics=statistics)


# ----------------------------------------------------------------------
# suites

SUITES = {
    "standard": {"entry": 10_000, "quotient": 20_000, "uv": 10_000, "component": 10_000},
    "quick": {"entry": 2_000, "quotient": 4_000, "uv": 2_000, "component": 2_000},
    "full": {"entry": 100_000, "quotient": 100_000, "uv": 20_000, "component": 100_000},
}


def invariance_targets(chi: Multiplier, chi_prime: Multiplier) -> tuple[list[str], list[tuple[str, str]]]:
    """Elements of the minimal set union S whose quotient invariance is testable.

    Returns ``(testable, skipped)`` with a reason for each skipped element.
    """
    p = chi.poset
    seps = p.separators()
    targets = [lab for lab in p.labels if lab in p.minimal_elements() or lab in seps.minimal]
    ok, skipped = [], []
    for lab in targets:
        idx = np.flatnonzero(p.leq[p.index(lab)])
        sub = p.subposet(p.labels[k] for k in idx)
        if not np.all(sub.mask):
            skipped.append((lab, "sub-poset not totally ordered"))
            continue
        s, s2 = effective_shapes(chi, lab), effective_shapes(chi_prime, lab)
        if len(idx) > 1 and (np.ptp(s) > 1e-12 or np.ptp(s2) > 1e-12):
            skipped.append((lab, "effective shapes not constant on the chain"))
            continue
        ok.append(lab)
    return ok, skipped


def run_suite(chi: Multiplier, chi_prime: Multiplier | None = None, suite: str = "standard",
              seed: int = 0, draws: int | None = None, level: float = LEVEL) -> list[TestReport]:
    sizes = dict(SUITES[suite])
    if draws is not None:
        sizes = {k: int(draws) for k in sizes}
    chi_prime = chi_prime or chi
    reports = []
    reports += test_entry_independence(chi, sizes["entry"], seed, level=level)
    targets, skipped = invariance_targets(chi, chi_prime)
    for lab in targets:
        reports.append(test_quotient_invariance(chi, chi_prime, lab, sizes["quotient"], seed,
                                                level=level))
    for lab, why in skipped:
        reports.append(TestReport(f"quotient_invariance[{lab}]", True, 0, seed, level,
                                  expect="skip", notes=f"skipped: {why}"))
    if targets:
        lab = next((t for t in targets if len(chi.poset.up_set(t)) > 1), None)
        if lab is not None:
            reports.append(test_quotient_invariance(
                chi, chi_prime, lab, sizes["quotient"], seed, level=level,
                sigma_prime=anisotropic_sigma(chi_prime)))
    reports.append(test_UV_independence(chi, chi_prime, sizes["uv"], seed, level=level))
    reports.append(test_UV_independence(chi, chi_prime, sizes["uv"], seed, control=True, level=level))
    reports.append(test_component_consistency(chi, sizes["component"], seed, level=level))
    if len(component_plan(chi.poset).components) > 1:
        reports.append(test_component_consistency(chi, sizes["component"], seed, control=True,
                                                  level=level))
    return reports


def anisotropic_sigma(chi: Multiplier, spread: float = 4.0):
    """A non-standard sigma = diag(lambda_i c_i) with c alternating spread, 1/spread."""
    c = np.array([spread if k % 2 == 0 else 1 / spread for k in range(len(chi.poset))])
    return ConePoint.from_lower(np.diag(np.sqrt(chi.lambdas * c)), chi.poset)


def false_alarm_estimate(reports: Sequence[TestReport]) -> float:
    """Upper bound on the chance that some accept-type check fails under its null."""
    n = sum(1 for r in reports if r.expect == "accept" and r.n_draws > 0)
    return float(1 - (1 - LEVEL) ** n) if n else 0.0
