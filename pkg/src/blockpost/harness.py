"""Monte Carlo campaigns and exhaustive scans that exercise the
posterior-concentration statements at desk scale.

Three kinds of experiment:

* convergence / sparse sweeps over a grid of sizes, recording per
  replicate the posterior mass of the true class, the posterior-mode
  misclassification and the finite-size bound values;
* concentration checks comparing empirical tail frequencies of the
  centered log-ratio statistic against its rate-function bound;
* exhaustive scans over all configuration pairs of a small instance,
  asserting the difference-count lower bound and the two-sided
  conditional-expectation sandwich.

Every replicate derives its seeds deterministically from the master
seed and its (grid index, replicate index) position, so reruns
reproduce results bit-exactly regardless of execution order.  At sizes
beyond the enumeration cap the sweeps switch to *sampled-sandwich*
mode: comparison configurations are drawn at fixed distances from the
truth and the posterior mode is taken over the sampled candidate set
plus the truth's equivalence class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import binom as _binom
from scipy.stats import norm as _norm

from .bounds import BoundReport, theorem_constants
from .errors import CapExceededError, SpecError, TheoryPreconditionError
from .families import Bernoulli, Multinomial, ZeroInflated
from .io import spec_content_hash, spec_from_dict, spec_to_dict, write_csv, write_sidecar
from .model import (
    Configuration,
    ConnectivityMatrix,
    ModelSpec,
    block_pair_counts,
    derive_seed,
    in_good_set,
    index_mask,
    make_rng,
    sample_configuration,
    sample_observations,
)
from .posterior import (
    delta_statistic,
    enumerate_label_vectors,
    exact_posterior,
    expected_delta,
    log_prior,
    misclassification,
    posterior_mass_of_class,
)
from .rates import rate_function, sparse_scalings
from .symmetry import SymmetryGroup, apply_perm, config_distance, detect_symmetry_group

__all__ = [
    "ExperimentPlan",
    "ExperimentResult",
    "run_convergence_sweep",
    "run_sparse_sweep",
    "run_concentration_check",
    "run_exhaustive_checks",
    "ExhaustiveReport",
    "perturb_connectivity",
    "sample_config_at_distance",
    "sandwich_check_enumerated",
    "sandwich_check_sampled",
    "binomial_tail_ok",
]

_THREE_SIGMA_LEVEL = float(_norm.sf(3.0))  # one-sided 3-sigma tail mass

RESULT_COLUMNS = [
    "n",
    "m",
    "xi",
    "replicate",
    "seed_key",
    "mode",
    "good_set",
    "class_mass_truth",
    "map_raw",
    "map_up_to_equiv",
    "a_nm",
    "eps_nm",
    "class_mass_lower",
    "sandwich_checked",
    "sandwich_violations",
    "rate_value",
    "mean_nnz_row",
]


# ----------------------------------------------------------------------
# plans and results


@dataclass
class ExperimentPlan:
    """Resolved sweep plan.

    ``m_rule`` is "n", "n_over_log_n" or an explicit list matching
    ``n_grid``; ``xi_rule`` is None (dense), "const:<v>",
    "log_sq_over_n" or an explicit list.  ``mode`` picks enumeration or
    sampled-sandwich handling ("auto" switches on the enumeration cap).
    """

    spec: ModelSpec
    n_grid: list[int]
    replicates: int
    master_seed: int
    m_rule: str | list[int] = "n"
    eta: float = 0.0
    xi_rule: str | list[float] | None = None
    mode: str = "auto"
    enum_cap: int = 2**20
    candidates_per_distance: int = 8
    check_sandwich: bool = True

    def __post_init__(self):
        if not self.n_grid or any(int(n) < 1 for n in self.n_grid):
            raise SpecError("n_grid must be a nonempty list of positive sizes")
        self.n_grid = [int(n) for n in self.n_grid]
        if self.replicates < 1:
            raise SpecError("need at least one replicate")
        if self.mode not in ("auto", "enumerate", "sampled"):
            raise SpecError(f"unknown mode {self.mode!r}")
        if isinstance(self.m_rule, list):
            if len(self.m_rule) != len(self.n_grid):
                raise SpecError("explicit m list must match n_grid length")
        elif self.m_rule not in ("n", "n_over_log_n"):
            raise SpecError(f"unknown m rule {self.m_rule!r}")
        if isinstance(self.xi_rule, list) and len(self.xi_rule) != len(self.n_grid):
            raise SpecError("explicit xi list must match n_grid length")
        for k, n in enumerate(self.n_grid):
            if self.m_of(k) > n:
                raise SpecError("column count may not exceed row count on the grid")

    def m_of(self, k: int) -> int:
        n = self.n_grid[k]
        if self.spec.variant.is_sbm:
            return n
        if isinstance(self.m_rule, list):
            return int(self.m_rule[k])
        if self.m_rule == "n":
            return n
        return max(1, math.ceil(n / math.log(max(n, 3))))

    def xi_of(self, k: int) -> float | None:
        if self.xi_rule is None:
            return None
        n = self.n_grid[k]
        if isinstance(self.xi_rule, list):
            return float(self.xi_rule[k])
        if self.xi_rule.startswith("const:"):
            return float(self.xi_rule.split(":", 1)[1])
        if self.xi_rule == "log_sq_over_n":
            return min(1.0, math.log(n) ** 2 / n)
        raise SpecError(f"unknown xi rule {self.xi_rule!r}")

    def theory_labels(self) -> dict:
        """Asymptotic-regime validity labels for the resolved grid.

        A plan outside the regime still runs; the labels make the output
        self-describing.
        """
        ns = self.n_grid
        ms = [self.m_of(k) for k in range(len(ns))]
        ratio = [math.log(max(n, 2)) / m for n, m in zip(ns, ms)]
        labels = {
            "m_le_n": all(m <= n for n, m in zip(ns, ms)),
            "log_n_over_m_trend_ok": all(b <= a + 1e-12 for a, b in zip(ratio, ratio[1:])),
        }
        if self.xi_rule is not None:
            xis = [self.xi_of(k) for k in range(len(ns))]
            r2 = [math.log(max(n, 2)) / (m * x) for n, m, x in zip(ns, ms, xis)]
            labels["log_n_over_m_xi_trend_ok"] = all(
                b <= a + 1e-12 for a, b in zip(r2, r2[1:])
            )
            labels["outside_theory"] = not labels["log_n_over_m_xi_trend_ok"]
        else:
            labels["outside_theory"] = not labels["log_n_over_m_trend_ok"]
        return labels

    def to_dict(self) -> dict:
        return {
            "spec": spec_to_dict(self.spec),
            "n_grid": self.n_grid,
            "m_rule": self.m_rule,
            "replicates": self.replicates,
            "eta": self.eta,
            "xi_rule": self.xi_rule,
            "master_seed": self.master_seed,
            "mode": self.mode,
            "enum_cap": self.enum_cap,
            "candidates_per_distance": self.candidates_per_distance,
            "check_sandwich": self.check_sandwich,
            "theory_labels": self.theory_labels(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentPlan":
        spec = spec_from_dict(d["spec"])
        return ExperimentPlan(
            spec=spec,
            n_grid=list(d["n_grid"]),
            replicates=int(d["replicates"]),
            master_seed=int(d["master_seed"]),
            m_rule=d.get("m_rule", "n"),
            eta=float(d.get("eta", 0.0)),
            xi_rule=d.get("xi_rule"),
            mode=d.get("mode", "auto"),
            enum_cap=int(d.get("enum_cap", 2**20)),
            candidates_per_distance=int(d.get("candidates_per_distance", 8)),
            check_sandwich=bool(d.get("check_sandwich", True)),
        )


@dataclass
class ExperimentResult:
    """Sweep output: one row per (grid point, replicate), plus the
    resolved plan and the content hash of the spec for exact replay."""

    rows: list[dict]
    plan: dict
    spec_hash: str

    def to_csv_text(self) -> str:
        data = [[row.get(c) for c in RESULT_COLUMNS] for row in self.rows]
        return write_csv(None, RESULT_COLUMNS, data)

    def save(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(self.to_csv_text())
        write_sidecar(out / "plan.json", {"plan": self.plan, "spec_hash": self.spec_hash})

    def aggregate(self) -> list[dict]:
        """Per grid point: mean errors and event frequencies."""
        by_n: dict[tuple, list[dict]] = {}
        for row in self.rows:
            by_n.setdefault((row["n"], row["m"]), []).append(row)
        out = []
        for (n, m), rows in sorted(by_n.items()):
            ups = [r["map_up_to_equiv"] for r in rows]
            masses = [r["class_mass_truth"] for r in rows if r["class_mass_truth"] is not None]
            covered = [
                1.0 if r["class_mass_truth"] >= r["class_mass_lower"] else 0.0
                for r in rows
                if r["class_mass_truth"] is not None and r["class_mass_lower"] is not None
            ]
            out.append(
                {
                    "n": n,
                    "m": m,
                    "mean_up_to_equiv": float(np.mean(ups)),
                    "frac_zero_error": float(np.mean([u == 0 for u in ups])),
                    "mean_class_mass": float(np.mean(masses)) if masses else None,
                    "frac_good_set": float(np.mean([r["good_set"] for r in rows])),
                    "frac_mass_above_bound": float(np.mean(covered)) if covered else None,
                }
            )
        return out


# ----------------------------------------------------------------------
# building blocks


def binomial_tail_ok(hits: int, trials: int, bound: float) -> bool:
    """Empirical frequency consistent with success probability at most
    ``bound``: accept unless the observed count lies beyond the
    one-sided 3-sigma tail of a binomial(trials, bound)."""
    if bound >= 1.0:
        return True
    if hits / trials <= bound:
        return True
    return float(_binom.sf(hits - 1, trials, bound)) >= _THREE_SIGMA_LEVEL


def perturb_connectivity(
    spec: ModelSpec, eta: float, sigma: SymmetryGroup, rng: np.random.Generator
) -> ConnectivityMatrix:
    """Uniform entrywise perturbation of the unscaled connectivity
    values inside the eta-ball, clipped to the family box and projected
    onto the symmetry-invariant subspace (entry-orbit averaging), so the
    perturbed matrix stays in the invariant parameter set."""
    fam = spec.family
    base = spec.pi.values
    if eta == 0.0:
        return spec.pi
    if isinstance(fam, Multinomial):
        out = base.copy()
        Q, L, _ = out.shape
        for q in range(Q):
            for l in range(L):
                out[q, l] = _perturb_simplex(out[q, l], eta, fam.a, rng)
    else:
        off = rng.uniform(-eta, eta, size=base.shape)
        out = base + off
        if isinstance(fam, ZeroInflated):
            lo_i, hi_i = fam.inner.bounds
            out[..., 0] = np.clip(out[..., 0], fam.a, 1.0 - fam.a)
            out[..., 1] = np.clip(out[..., 1], lo_i, hi_i)
        else:
            lo, hi = fam.bounds
            out = np.clip(out, lo, hi)
    if not sigma.is_trivial:
        acc = np.zeros_like(out)
        for s, t in sigma.pairs:
            acc += out[np.ix_(np.asarray(s), np.asarray(t))]
        out = acc / sigma.order
    return ConnectivityMatrix(out, fam, scale=spec.pi.scale)


def _perturb_simplex(vec: np.ndarray, eta: float, a: float, rng) -> np.ndarray:
    """Zero-sum perturbation of a box-constrained probability vector,
    staying within the eta-ball of the original."""
    p = vec.size
    for scale in (eta, eta / 2.0, eta / 4.0, eta / 8.0):
        off = rng.uniform(-scale / 2.0, scale / 2.0, size=p)
        off -= off.mean()
        cand = vec + off
        if (
            np.all(cand >= a - 1e-15)
            and np.all(cand <= 1.0 - a + 1e-15)
            and np.max(np.abs(cand - vec)) <= eta + 1e-15
        ):
            return cand
    return vec.copy()


def sample_config_at_distance(
    truth: Configuration, r: int, Q: int, L: int, sbm: bool, rng: np.random.Generator
) -> Configuration:
    """Uniform configuration at raw label-flip distance ``r`` from the
    truth; in the bipartite case the flip budget is split across rows
    and columns with weights proportional to the number of
    configurations per split."""
    n, m = truth.n, truth.m
    if sbm:
        if Q < 2:
            raise SpecError("no distinct configuration exists with a single group")
        flips = rng.choice(n, size=min(r, n), replace=False)
        z = truth.z.copy()
        z[flips] = (z[flips] + 1 + rng.integers(0, Q - 1, size=flips.size)) % Q
        return Configuration(z)
    lo = max(0, r - m)
    hi = min(r, n)
    splits = np.arange(lo, hi + 1)
    logw = []
    for r1 in splits:
        r2 = r - r1
        if (Q == 1 and r1 > 0) or (L == 1 and r2 > 0):
            logw.append(-math.inf)
            continue
        logw.append(
            _log_comb(n, r1)
            + r1 * math.log(max(Q - 1, 1))
            + _log_comb(m, r2)
            + r2 * math.log(max(L - 1, 1))
        )
    logw = np.asarray(logw, dtype=float)
    if np.all(np.isneginf(logw)):
        raise SpecError("no configuration exists at the requested distance")
    w = np.exp(logw - np.max(logw))
    w /= w.sum()
    r1 = int(rng.choice(splits, p=w))
    r2 = r - r1
    z = truth.z.copy()
    wv = truth.w.copy()
    if r1 > 0:
        rows_idx = rng.choice(n, size=r1, replace=False)
        z[rows_idx] = (z[rows_idx] + 1 + rng.integers(0, Q - 1, size=r1)) % Q
    if r2 > 0:
        cols_idx = rng.choice(m, size=r2, replace=False)
        wv[cols_idx] = (wv[cols_idx] + 1 + rng.integers(0, L - 1, size=r2)) % L
    return Configuration(z, wv)


def _log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


# ----------------------------------------------------------------------
# sandwich checks


def _distance_arrays(z_all, w_all, truth: Configuration, sigma: SymmetryGroup):
    """Per-config quotient-distance splits (r1, r2) to the truth, using
    the lexicographically-first minimizing pair (pairs are sorted)."""
    nz = z_all.shape[0]
    best_d = best_r1 = best_r2 = None
    for s, t in sigma.pairs:
        sz = apply_perm(s, truth.z)
        h1 = (z_all != sz[None, :]).sum(axis=1)
        if w_all is None:
            r1b = h1
            r2b = h1
            db = 2 * h1
        else:
            tw = apply_perm(t, truth.w)
            h2 = (w_all != tw[None, :]).sum(axis=1)
            r1b = np.broadcast_to(h1[:, None], (nz, w_all.shape[0]))
            r2b = np.broadcast_to(h2[None, :], (nz, w_all.shape[0]))
            db = r1b + r2b
        if best_d is None:
            best_d = np.array(db)
            best_r1 = np.array(r1b)
            best_r2 = np.array(r2b)
        else:
            better = db < best_d
            best_d = np.where(better, db, best_d)
            best_r1 = np.where(better, r1b, best_r1)
            best_r2 = np.where(better, r2b, best_r2)
    return best_r1, best_r2


def sandwich_check_enumerated(
    table,
    truth: Configuration,
    sigma: SymmetryGroup,
    report: BoundReport,
    deviation: float,
    tol: float = 1e-9,
) -> tuple[int, int]:
    """Two-sided posterior-ratio check over every configuration and
    every symmetry pair; returns (checked, violations).

    The lower slope uses the actual connectivity deviation; the
    proportions-gap term counts row and column mismatches to the
    reference member in the bipartite case and row mismatches once in
    the graph case.
    """
    n, m = table.n, table.m
    c_low = report.c - 2.0 * report.L0 * deviation
    C = report.C
    K = report.K
    z_all = table.z_configs
    w_all = table.w_configs
    r1, r2 = _distance_arrays(z_all, w_all, truth, sigma)
    scale = (m * np.asarray(r1, dtype=float) + n * np.asarray(r2, dtype=float))
    logp = table.log_values
    checked = 0
    violations = 0
    for s, t in sigma.pairs:
        sz = apply_perm(s, truth.z)
        if table.sbm:
            ref = Configuration(sz)
        else:
            ref = Configuration(sz, apply_perm(t, truth.w))
        log_ref = table.log_prob(ref)
        lhs = log_ref - logp
        qz = (z_all != sz[None, :]).sum(axis=1)
        if table.sbm:
            qterm = qz.astype(float)
        else:
            tw = apply_perm(t, truth.w)
            qw = (w_all != tw[None, :]).sum(axis=1)
            qterm = (qz[:, None] + qw[None, :]).astype(float)
        lower = c_low * scale - K * qterm
        upper = C * scale + K * qterm
        bad = (lhs < lower - tol) | (lhs > upper + tol)
        checked += bad.size
        violations += int(np.count_nonzero(bad))
    return checked, violations


def sandwich_check_sampled(
    x,
    truth: Configuration,
    candidates: list[Configuration],
    spec: ModelSpec,
    pi_eval: ConnectivityMatrix,
    sigma: SymmetryGroup,
    report: BoundReport,
    deviation: float,
    rate_scale: float | None = None,
    tol: float = 1e-9,
) -> tuple[int, int]:
    """Sandwich check restricted to sampled comparison configurations.

    ``rate_scale`` optionally replaces the lower-bound slope (the
    xi-scaled constant of the sparse regime).
    """
    n, m = truth.n, truth.m
    c_low = rate_scale if rate_scale is not None else report.c - 2.0 * report.L0 * deviation
    C, K = report.C, report.K
    checked = 0
    violations = 0
    for cand in candidates:
        delta = delta_statistic(x, truth, cand, spec, pi=pi_eval)
        _, _, r1, r2 = config_distance(truth, cand, sigma)
        scale = float(m * r1 + n * r2)
        for s, t in sigma.pairs:
            sz = apply_perm(s, truth.z)
            qz = int(np.count_nonzero(sz != cand.z))
            if spec.variant.is_sbm:
                ref = Configuration(sz)
                qterm = float(qz)
            else:
                tw = apply_perm(t, truth.w)
                ref = Configuration(sz, tw)
                qterm = float(qz + np.count_nonzero(tw != cand.w))
            lhs = delta + log_prior(ref, spec) - log_prior(cand, spec)
            lower = c_low * scale - K * qterm
            upper = C * scale + K * qterm
            checked += 1
            if lhs < lower - tol or lhs > upper + tol:
                violations += 1
    return checked, violations


# ----------------------------------------------------------------------
# sweeps


def _resolve_mode(plan: ExperimentPlan, spec: ModelSpec, n: int, m: int) -> str:
    total = spec.Q**n if spec.variant.is_sbm else spec.Q**n * spec.L**m
    if plan.mode == "enumerate":
        if total > plan.enum_cap:
            raise CapExceededError(
                f"{total} configurations exceed the enumeration cap {plan.enum_cap}"
            )
        return "enumerate"
    if plan.mode == "sampled":
        return "sampled"
    return "enumerate" if total <= plan.enum_cap else "sampled"


def _candidate_distances(n: int) -> list[int]:
    return sorted({1, 2, max(1, math.ceil(n / 4)), max(1, math.ceil(n / 2))})


def _xi_spec(spec: ModelSpec, xi: float | None) -> ModelSpec:
    if xi is None:
        return spec
    return spec.with_pi(spec.pi.with_scale(xi))


def _sparse_bounds(spec: ModelSpec, n: int, m: int, rate_lin: float, psi_val: float, K: float, order: int):
    """a_nm and eps_nm with the xi-scaled replacements of the sparse
    regime (rate_lin replaces the dense linear slope, psi_val the rate
    function value at that slope)."""

    def ex(v: float) -> float:
        if v > 700.0:
            return math.inf
        if v < -745.0:
            return 0.0
        return math.exp(v)

    if spec.variant.is_sbm:
        a = n * ex(-2.0 * n * rate_lin + K)
        d = n * ex(-2.0 * psi_val * n)
        amin = float(spec.alpha.min())
        base = 2.0 * spec.Q * ex(-n * amin**2 / 2.0)
    else:
        a = n * ex(-rate_lin * m + K) + m * ex(-rate_lin * n + K)
        d = n * ex(-psi_val * m) + m * ex(-psi_val * n)
        base = 2.0 * spec.Q * spec.L * ex(-min(n, m) * spec.mu_min**2 / 2.0)
    eps = math.inf if math.isinf(d) else base + 2.0 * order * d * ex(d)
    return a, eps


def run_convergence_sweep(plan: ExperimentPlan) -> ExperimentResult:
    """Dense sweep: sample, perturb, evaluate the posterior, record."""
    return _run_sweep(plan, sparse=False)


def run_sparse_sweep(plan: ExperimentPlan) -> ExperimentResult:
    """Sparse sweep: connectivity scaled per grid point by the plan's
    xi rule; binary or zero-inflated cells only."""
    if plan.xi_rule is None:
        raise SpecError("a sparse sweep needs an xi rule")
    if not isinstance(plan.spec.family, (Bernoulli, ZeroInflated)):
        raise SpecError("sparse sweeps apply to bernoulli or zero-inflated cells")
    return _run_sweep(plan, sparse=True)


def _run_sweep(plan: ExperimentPlan, sparse: bool) -> ExperimentResult:
    base_spec = plan.spec
    sigma = detect_symmetry_group(base_spec.pi, base_spec.variant)
    try:
        report = theorem_constants(base_spec, plan.eta, sigma=sigma)
    except TheoryPreconditionError:
        # degenerate specs (single block, or identical entries) have no
        # concentration constants; the sweep itself stays well-defined
        if plan.eta > 0.0:
            raise
        report = None
    rows: list[dict] = []
    for k, n in enumerate(plan.n_grid):
        m = plan.m_of(k)
        xi = plan.xi_of(k) if sparse else None
        spec_n = _xi_spec(base_spec, xi)
        mode = _resolve_mode(plan, spec_n, n, m)
        rate_scale = None
        sparse_a = sparse_eps = None
        if sparse:
            mu = base_spec.mu_min
            sc = sparse_scalings(base_spec.pi, xi, mu)
            if sc.lipschitz_gamma_coeff is None:
                L0_unscaled = sc.lipschitz_pi_coeff / xi
                c_prime = mu**2 * sc.c_min / 16.0
            else:
                L0_unscaled = sc.lipschitz_pi_coeff / xi + sc.lipschitz_gamma_coeff / xi
                c_prime = mu**2 * (sc.c_min + base_spec.family.a * sc.tilde_kappa_min) / 16.0
            slope_unscaled = c_prime - 2.0 * L0_unscaled * plan.eta
            rate_scale = xi * slope_unscaled
            psi_val = float(sc.psi_lower(slope_unscaled))
            sparse_a, sparse_eps = _sparse_bounds(
                base_spec, n, m, rate_scale, psi_val, report.K, sigma.order
            )
        for rep in range(plan.replicates):
            row = _run_replicate(
                plan, spec_n, sigma, report, k, n, m, xi, rep, mode, sparse, rate_scale
            )
            row["rate_value"] = rate_scale
            if sparse:
                row["a_nm"] = sparse_a
                row["eps_nm"] = sparse_eps
                row["class_mass_lower"] = (
                    1.0 - sigma.order * sparse_a * math.exp(min(sparse_a, 700.0))
                    if not math.isinf(sparse_a)
                    else -math.inf
                )
            rows.append(row)
    return ExperimentResult(
        rows=rows, plan=plan.to_dict(), spec_hash=spec_content_hash(base_spec)
    )


def _run_replicate(
    plan: ExperimentPlan,
    spec_n: ModelSpec,
    sigma: SymmetryGroup,
    report: BoundReport,
    k: int,
    n: int,
    m: int,
    xi: float | None,
    rep: int,
    mode: str,
    sparse: bool,
    rate_scale: float | None,
) -> dict:
    seed_cfg = derive_seed(plan.master_seed, k, rep, 0)
    seed_obs = derive_seed(plan.master_seed, k, rep, 1)
    seed_pert = derive_seed(plan.master_seed, k, rep, 2)
    seed_cand = derive_seed(plan.master_seed, k, rep, 3)
    truth = sample_configuration(spec_n, n, m, seed_cfg)
    x = sample_observations(spec_n, truth, seed_obs)
    pert_base = perturb_connectivity(plan.spec, plan.eta, sigma, make_rng(seed_pert))
    pi_eval = pert_base.with_scale(xi) if xi is not None else pert_base
    deviation = float(np.max(np.abs(pert_base.values - plan.spec.pi.values)))
    row = {
        "n": n,
        "m": m,
        "xi": xi,
        "replicate": rep,
        "seed_key": f"{plan.master_seed}:{k}:{rep}",
        "mode": mode,
        "good_set": in_good_set(truth, spec_n),
        "a_nm": report.a_nm(n, m) if report is not None else None,
        "eps_nm": report.eps_nm(n, m) if report is not None else None,
        "class_mass_lower": report.class_mass_lower(n, m) if report is not None else None,
        "sandwich_checked": None,
        "sandwich_violations": None,
        "mean_nnz_row": None,
        "class_mass_truth": None,
    }
    if sparse:
        row["mean_nnz_row"] = float(np.count_nonzero(x.values[x.mask]) / n)
    if mode == "enumerate":
        table = exact_posterior(x, spec_n, pi=pi_eval, cap=plan.enum_cap)
        row["class_mass_truth"] = posterior_mass_of_class(table, truth, sigma)
        map_cfg = table.map_configuration()
        raw, up = misclassification(map_cfg, truth, sigma)
        row["map_raw"] = raw
        row["map_up_to_equiv"] = up
        if plan.check_sandwich and report is not None:
            checked, bad = sandwich_check_enumerated(table, truth, sigma, report, deviation)
            row["sandwich_checked"] = checked
            row["sandwich_violations"] = bad
    else:
        rng = make_rng(seed_cand)
        candidates = []
        for r in _candidate_distances(n):
            for _ in range(plan.candidates_per_distance):
                candidates.append(
                    sample_config_at_distance(
                        truth, r, spec_n.Q, spec_n.L, spec_n.variant.is_sbm, rng
                    )
                )
        _, raw, up = _restricted_map(x, truth, candidates, spec_n, pi_eval, sigma)
        row["map_raw"] = raw
        row["map_up_to_equiv"] = up
        if plan.check_sandwich and report is not None:
            checked, bad = sandwich_check_sampled(
                x, truth, candidates, spec_n, pi_eval, sigma, report, deviation, rate_scale
            )
            row["sandwich_checked"] = checked
            row["sandwich_violations"] = bad
    return row


def _restricted_map(
    x,
    truth: Configuration,
    candidates: list[Configuration],
    spec: ModelSpec,
    pi_eval: ConnectivityMatrix,
    sigma: SymmetryGroup,
):
    """Posterior mode over the truth's equivalence class plus sampled
    candidates; ties resolve toward the truth class."""
    best_truth = -math.inf
    best_member = None
    for s, t in sigma.pairs:
        member = (
            Configuration(apply_perm(s, truth.z))
            if spec.variant.is_sbm
            else Configuration(apply_perm(s, truth.z), apply_perm(t, truth.w))
        )
        val = log_prior(member, spec)
        if val > best_truth:
            best_truth = val
            best_member = member
    winner = best_member
    winner_score = 0.0  # log-posterior ratio against the best truth member
    for cand in candidates:
        lhs = -delta_statistic(x, best_member, cand, spec, pi=pi_eval)
        lhs += log_prior(cand, spec) - log_prior(best_member, spec)
        if lhs > winner_score + 1e-12:
            winner_score = lhs
            winner = cand
    raw, up = misclassification(winner, truth, sigma)
    return winner, raw, up


# ----------------------------------------------------------------------
# concentration check


def run_concentration_check(
    spec: ModelSpec,
    pairs: list[tuple[Configuration, Configuration]],
    eps_grid: list[float],
    replicates: int,
    master_seed: int,
    rate_variant: str | None = None,
) -> list[dict]:
    """Empirical two-sided tail of the log-ratio statistic against its
    rate-function bound.

    Cells where the two configurations share a parameter are never
    sampled (their log-ratio terms vanish identically); the remaining
    cells are drawn ``replicates`` times and the deviation frequency at
    each threshold is compared to 2 exp(-rate(eps) * (m r1 + n r2))
    (factor 4 for zero-inflated cells) through an exact one-sided
    binomial acceptance at the 3-sigma level.
    """
    fam = spec.family
    sigma = detect_symmetry_group(spec.pi, spec.variant)
    rate = rate_function(fam, spec.mu_min, rate_variant)
    factor = 4.0 if isinstance(fam, ZeroInflated) else 2.0
    eff = spec.pi.effective()
    pdim = () if fam.param_dim == 1 else (fam.param_dim,)
    rows = []
    for pidx, (c_star, c_alt) in enumerate(pairs):
        if not in_good_set(c_star, spec):
            raise TheoryPreconditionError("reference configuration must be well-balanced")
        n, m = c_star.n, c_star.m
        mask = index_mask(spec.variant, n, m)
        _, _, r1, r2 = config_distance(c_alt, c_star, sigma)
        scale = float(m * r1 + n * r2)
        if scale == 0.0:
            continue
        delta_mean = expected_delta(c_star, c_alt, spec)
        counts = block_pair_counts(mask, c_star.z, c_star.w, c_alt.z, c_alt.w, spec.Q, spec.L)
        rng = make_rng(derive_seed(master_seed, pidx))
        devs = np.zeros(replicates)
        for q1 in range(spec.Q):
            for l1 in range(spec.L):
                for q2 in range(spec.Q):
                    for l2 in range(spec.L):
                        cnt = int(counts[q1, l1, q2, l2])
                        if cnt == 0:
                            continue
                        p1 = np.asarray(eff[q1, l1])
                        p2 = np.asarray(eff[q2, l2])
                        if bool(np.all(fam.params_equal(p1, p2))):
                            continue
                        shape = (replicates, cnt)
                        draws = fam.sample(np.broadcast_to(p1, shape + pdim), rng)
                        ld1 = fam.log_density(draws, np.broadcast_to(p1, shape + pdim))
                        ld2 = fam.log_density(draws, np.broadcast_to(p2, shape + pdim))
                        devs += (ld1 - ld2).sum(axis=1)
        devs = np.abs(devs - delta_mean)
        for eps in eps_grid:
            thr = eps * scale
            hits = int(np.count_nonzero(devs >= thr))
            bound = factor * math.exp(-float(rate(eps)) * scale)
            rows.append(
                {
                    "pair": pidx,
                    "r1": r1,
                    "r2": r2,
                    "eps": eps,
                    "threshold": thr,
                    "hits": hits,
                    "replicates": replicates,
                    "empirical": hits / replicates,
                    "bound": min(bound, 1.0),
                    "vacuous": bound >= 1.0,
                    "ok": binomial_tail_ok(hits, replicates, bound),
                }
            )
    return rows


# ----------------------------------------------------------------------
# exhaustive scans


@dataclass
class ExhaustiveReport:
    """Counts and worst slacks from the exhaustive pair scans."""

    n: int
    m: int
    lemma_pairs: int
    lemma_violations: int
    lemma_worst_slack: float
    prop_pairs: int
    prop_lower_violations: int
    prop_upper_violations: int
    prop_worst_lower_slack: float
    prop_worst_upper_slack: float
    perturbations: int

    @property
    def ok(self) -> bool:
        return (
            self.lemma_violations == 0
            and self.prop_lower_violations == 0
            and self.prop_upper_violations == 0
        )


def _combo_counts(all_cfg: np.ndarray, ref: np.ndarray, G: int) -> np.ndarray:
    """(N, G*G) counts of the joint (reference label, config label)
    combination per position, for every enumerated configuration."""
    N = all_cfg.shape[0]
    combo = ref[None, :].astype(np.int64) * G + all_cfg
    out = np.zeros((N, G * G), dtype=np.int64)
    for a in range(G * G):
        out[:, a] = (combo == a).sum(axis=1)
    return out


def _combo_expand_sbm(mat: np.ndarray, Q: int) -> np.ndarray:
    """Expand a (Q*Q, Q*Q) block-pair matrix M[ref_block, cfg_block]
    onto node-combination indexing: G[a, b] with a = (ref_i, cfg_i) and
    b = (ref_j, cfg_j) looks up M[(ref_i, ref_j), (cfg_i, cfg_j)]."""
    out = np.empty((Q * Q, Q * Q))
    m4 = mat.reshape(Q, Q, Q, Q)  # [ref_q, ref_l, cfg_q, cfg_l]
    for a in range(Q * Q):
        q1r, q1c = divmod(a, Q)
        for b in range(Q * Q):
            q2r, q2c = divmod(b, Q)
            out[a, b] = m4[q1r, q2r, q1c, q2c]
    return out


def _reshape_pairmat(mat: np.ndarray, Q: int, L: int) -> np.ndarray:
    """Reorder a (Q*L, Q*L) matrix M[ref_block, cfg_block] into the
    (Q*Q, L*L) row/column-combination form used by the bipartite scan."""
    m4 = mat.reshape(Q, L, Q, L)  # [ref_q, ref_l, cfg_q, cfg_l]
    return m4.transpose(0, 2, 1, 3).reshape(Q * Q, L * L)


def _sbm_pair_values(cnts: np.ndarray, G: np.ndarray, z_all, z_ref, variant) -> np.ndarray:
    """Sum of per-cell terms over the graph index set for every config."""
    base = np.einsum("ca,ab,cb->c", cnts, G, cnts)
    if variant.directed and variant.self_loops:
        return base
    diag = cnts @ np.diagonal(G)
    if variant.directed:
        return base - diag
    return (base - diag) / 2.0


def run_exhaustive_checks(
    spec: ModelSpec,
    n: int,
    m: int,
    eta: float = 0.0,
    n_perturbations: int = 0,
    master_seed: int = 0,
    tol: float = 1e-9,
    pair_cap: int = 50_000_000,
) -> ExhaustiveReport:
    """Scan all configuration pairs of a small instance.

    Asserts, for every comparison configuration and every well-balanced
    reference, the difference-count lower bound; and for every pair the
    conditional-expectation sandwich at the true parameter and at
    ``n_perturbations`` random perturbations inside the eta-ball (the
    upper bound is checked for all references, the lower one on the
    well-balanced set).
    """
    sigma = detect_symmetry_group(spec.pi, spec.variant)
    report = theorem_constants(spec, 0.0, sigma=sigma)
    mu = spec.mu_min
    Q, L = spec.Q, spec.L
    sbm = spec.variant.is_sbm
    if sbm and n != m:
        raise SpecError("graph variant requires n == m")
    z_all = enumerate_label_vectors(Q, n)
    w_all = None if sbm else enumerate_label_vectors(L, m)
    nz = z_all.shape[0]
    nw = 1 if sbm else w_all.shape[0]
    if (nz * nw) ** 2 > pair_cap:
        raise CapExceededError(
            f"{(nz * nw) ** 2} configuration pairs exceed the cap {pair_cap}"
        )

    nq = np.stack([(z_all == q).sum(axis=1) for q in range(Q)], axis=1)
    good_z = np.all(nq >= n * mu / 2.0, axis=1)
    if not sbm:
        nl = np.stack([(w_all == l).sum(axis=1) for l in range(L)], axis=1)
        good_w = np.all(nl >= m * mu / 2.0, axis=1)

    eff_star = spec.pi.effective()
    fam = spec.family
    flat_star = eff_star.reshape((Q * L,) + eff_star.shape[2:])
    if fam.param_dim == 1:
        neq = ~fam.params_equal(flat_star[:, None], flat_star[None, :])
    else:
        neq = ~fam.params_equal(flat_star[:, None, :], flat_star[None, :, :])
    neq = neq.astype(float)

    pis = [spec.pi]
    if n_perturbations > 0:
        if eta <= 0.0:
            raise TheoryPreconditionError("perturbation scans need a positive eta")
        eta_max = report.c / (2.0 * report.L0)
        if eta >= eta_max:
            raise TheoryPreconditionError(f"eta must stay below c/(2 L0) = {eta_max:.6g}")
        for pidx in range(n_perturbations):
            rng = make_rng(derive_seed(master_seed, 7000 + pidx))
            pis.append(perturb_connectivity(spec, eta, sigma, rng))

    def cross_matrix(pi_eval: ConnectivityMatrix) -> np.ndarray:
        eff = pi_eval.effective()
        flat_pi = eff.reshape((Q * L,) + eff.shape[2:])
        if fam.param_dim == 1:
            a = flat_pi[:, None]
            b = flat_pi[None, :]
            r = flat_star[:, None]
        else:
            a = flat_pi[:, None, :]
            b = flat_pi[None, :, :]
            r = flat_star[:, None, :]
        return np.asarray(fam.cross_log_ratio(a, b, r), dtype=float)

    cross_mats = [cross_matrix(p) for p in pis]
    devs = [float(np.max(np.abs(p.values - spec.pi.values))) for p in pis]

    if sbm:
        G_neq = _combo_expand_sbm(neq, Q)
        G_cross = [_combo_expand_sbm(mm, Q) for mm in cross_mats]
    else:
        M_neq = _reshape_pairmat(neq, Q, L)
        M_cross = [_reshape_pairmat(mm, Q, L) for mm in cross_mats]

    lemma_pairs = lemma_viol = prop_pairs = low_viol = up_viol = 0
    lemma_slack = low_slack = up_slack = math.inf

    for zs_idx in range(nz):
        z_ref = z_all[zs_idx]
        if sbm:
            truth = Configuration(z_ref)
            r1, r2 = _distance_arrays(z_all, None, truth, sigma)
            scale = (m * np.asarray(r1, dtype=float) + n * np.asarray(r2, dtype=float))
            cnts = _combo_counts(z_all, z_ref, Q).astype(float)
            diff = _sbm_pair_values(cnts, G_neq, z_all, z_ref, spec.variant)
            ref_good = bool(good_z[zs_idx])
            if ref_good:
                slack = diff - mu * mu / 8.0 * scale
                lemma_pairs += slack.size
                lemma_viol += int(np.count_nonzero(slack < -tol))
                lemma_slack = min(lemma_slack, float(np.min(slack)))
            for Gx, dev in zip(G_cross, devs):
                delta = _sbm_pair_values(cnts, Gx, z_all, z_ref, spec.variant)
                su = report.C / 2.0 * scale - delta
                prop_pairs += su.size
                up_viol += int(np.count_nonzero(su < -tol))
                up_slack = min(up_slack, float(np.min(su)))
                if ref_good:
                    sl = delta - 2.0 * (report.c - report.L0 * dev) * scale
                    low_viol += int(np.count_nonzero(sl < -tol))
                    low_slack = min(low_slack, float(np.min(sl)))
        else:
            Rz = _combo_counts(z_all, z_ref, Q).astype(float)
            for ws_idx in range(nw):
                w_ref = w_all[ws_idx]
                truth = Configuration(z_ref, w_ref)
                r1, r2 = _distance_arrays(z_all, w_all, truth, sigma)
                scale = m * np.asarray(r1, dtype=float) + n * np.asarray(r2, dtype=float)
                Cw = _combo_counts(w_all, w_ref, L).astype(float)
                diff = Rz @ M_neq @ Cw.T
                ref_good = bool(good_z[zs_idx] and good_w[ws_idx])
                if ref_good:
                    slack = diff - mu * mu / 8.0 * scale
                    lemma_pairs += slack.size
                    lemma_viol += int(np.count_nonzero(slack < -tol))
                    lemma_slack = min(lemma_slack, float(np.min(slack)))
                for Mx, dev in zip(M_cross, devs):
                    delta = Rz @ Mx @ Cw.T
                    su = report.C / 2.0 * scale - delta
                    prop_pairs += su.size
                    up_viol += int(np.count_nonzero(su < -tol))
                    up_slack = min(up_slack, float(np.min(su)))
                    if ref_good:
                        sl = delta - 2.0 * (report.c - report.L0 * dev) * scale
                        low_viol += int(np.count_nonzero(sl < -tol))
                        low_slack = min(low_slack, float(np.min(sl)))
    return ExhaustiveReport(
        n=n,
        m=m,
        lemma_pairs=lemma_pairs,
        lemma_violations=lemma_viol,
        lemma_worst_slack=lemma_slack,
        prop_pairs=prop_pairs,
        prop_lower_violations=low_viol,
        prop_upper_violations=up_viol,
        prop_worst_lower_slack=low_slack,
        prop_worst_upper_slack=up_slack,
        perturbations=len(pis) - 1,
    )
