"""Connectivity-matrix symmetries and configuration equivalence.

A permutation pair (s, t) acts on the connectivity matrix by relabeling
blocks, pi -> pi[s(q), t(l)], and on configurations by relabeling
entries, (z, w) -> (s(z), t(w)).  The pairs fixing the matrix form a
subgroup; two configurations are equivalent when one maps onto the
other under some pair of that subgroup, and the quotient distance is
the minimal joint Hamming distance over the subgroup.

Detection is exact brute force over permutations with early pruning;
instances here are small by design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import CapExceededError, SpecError, TheoryPreconditionError
from .families import Family
from .model import Configuration, ConnectivityMatrix, ModelVariant, index_mask

__all__ = [
    "SymmetryGroup",
    "detect_symmetry_group",
    "are_equivalent",
    "config_distance",
    "canonical_representative",
    "diff_count",
    "check_bound_number",
]

def _factorial(k: int) -> int:
    return math.factorial(k)


def apply_perm(perm: tuple[int, ...], labels: np.ndarray) -> np.ndarray:
    """Relabel entries: label q becomes perm[q]."""
    return np.asarray(perm, dtype=np.int64)[labels]


def _invert(perm: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


@dataclass(frozen=True)
class SymmetryGroup:
    """Finite set of permutation pairs leaving a connectivity matrix
    invariant; in the graph case every pair has equal components."""

    pairs: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    Q: int
    L: int
    sbm: bool

    def __post_init__(self):
        if not self.pairs:
            raise SpecError("a symmetry group must at least contain the identity pair")
        normalized = tuple(sorted((tuple(s), tuple(t)) for s, t in self.pairs))
        object.__setattr__(self, "pairs", normalized)
        if self.sbm and any(s != t for s, t in normalized):
            raise SpecError("graph-case symmetry pairs must have equal components")

    @property
    def order(self) -> int:
        return len(self.pairs)

    @property
    def is_trivial(self) -> bool:
        return self.order == 1

    def contains(self, s: tuple[int, ...], t: tuple[int, ...]) -> bool:
        return (tuple(s), tuple(t)) in set(self.pairs)

    def verify_group_axioms(self) -> bool:
        """Identity, closure and inverses, checked by enumeration."""
        pair_set = set(self.pairs)
        ident = (tuple(range(self.Q)), tuple(range(self.L)))
        if ident not in pair_set:
            return False
        for s1, t1 in pair_set:
            if (_invert(s1), _invert(t1)) not in pair_set:
                return False
            for s2, t2 in pair_set:
                comp = (
                    tuple(s1[s2[q]] for q in range(self.Q)),
                    tuple(t1[t2[l]] for l in range(self.L)),
                )
                if comp not in pair_set:
                    return False
        return True

    def fixes_matrix(self, pi_effective: np.ndarray, atol: float = 0.0) -> bool:
        """Every member maps the matrix onto itself entrywise."""
        for s, t in self.pairs:
            if not _pair_fixes(pi_effective, s, t, atol):
                return False
        return True

    @staticmethod
    def trivial(Q: int, L: int, sbm: bool) -> "SymmetryGroup":
        return SymmetryGroup(
            pairs=((tuple(range(Q)), tuple(range(L))),), Q=Q, L=L, sbm=sbm
        )


def _pair_fixes(eff, s, t, atol: float) -> bool:
    permuted = eff[np.ix_(np.asarray(s), np.asarray(t))]
    if atol > 0.0:
        return bool(np.all(np.abs(permuted - eff) <= atol))
    return bool(np.all(permuted == eff))


def detect_symmetry_group(
    pi: ConnectivityMatrix | np.ndarray,
    variant: ModelVariant,
    family: Family | None = None,
    atol: float = 0.0,
    pair_cap: int = 10_000_000,
) -> SymmetryGroup:
    """Maximal subgroup of permutation pairs fixing the matrix.

    Enumerates row permutations (paired with themselves in the graph
    case, crossed with all column permutations otherwise) and keeps the
    pairs mapping the matrix exactly onto itself.  Exact bitwise
    comparison by default; pass ``atol`` for matrices produced by
    arithmetic.  By maximality the detected group automatically excludes
    any symmetry outside itself.
    """
    if isinstance(pi, ConnectivityMatrix):
        family = pi.family
        eff = pi.effective()
    else:
        if family is None:
            raise SpecError("family required when passing a bare parameter array")
        eff = np.asarray(pi, dtype=float)
    Q, L = eff.shape[0], eff.shape[1]
    total = _factorial(Q) if variant.is_sbm else _factorial(Q) * _factorial(L)
    if total > pair_cap:
        raise CapExceededError(
            f"{total} candidate permutation pairs exceed the cap {pair_cap}"
        )
    pairs = []
    if variant.is_sbm:
        if Q != L:
            raise SpecError("graph variant requires a square connectivity matrix")
        for s in permutations(range(Q)):
            if _pair_fixes(eff, s, s, atol):
                pairs.append((s, s))
    else:
        col_perms = list(permutations(range(L)))
        for s in permutations(range(Q)):
            for t in col_perms:
                if _pair_fixes(eff, s, t, atol):
                    pairs.append((s, t))
    return SymmetryGroup(pairs=tuple(sorted(pairs)), Q=Q, L=L, sbm=variant.is_sbm)


def _check_same_dims(c1: Configuration, c2: Configuration) -> None:
    if c1.n != c2.n or c1.m != c2.m:
        raise SpecError(
            f"configuration dimensions differ: ({c1.n}, {c1.m}) vs ({c2.n}, {c2.m})"
        )


def are_equivalent(c1: Configuration, c2: Configuration, sigma: SymmetryGroup) -> bool:
    """True when some pair of the group maps c2 onto c1."""
    _check_same_dims(c1, c2)
    for s, t in sigma.pairs:
        if np.array_equal(apply_perm(s, c2.z), c1.z) and np.array_equal(
            apply_perm(t, c2.w), c1.w
        ):
            return True
    return False


def config_distance(
    c1: Configuration, c2: Configuration, sigma: SymmetryGroup
) -> tuple[int, tuple[tuple[int, ...], tuple[int, ...]], int, int]:
    """Quotient distance between configurations.

    Returns ``(d, (s, t), r1, r2)`` where d minimizes
    ||z1 - s(z2)||_0 + ||w1 - t(w2)||_0 over the group and (r1, r2) is
    the split at the minimizing pair.  Among minimizing pairs the
    lexicographically smallest one is returned, which makes the split
    deterministic.
    """
    _check_same_dims(c1, c2)
    best = None
    for s, t in sigma.pairs:  # pairs are sorted, so first minimum is lexicographic min
        r1 = int(np.count_nonzero(c1.z != apply_perm(s, c2.z)))
        r2 = int(np.count_nonzero(c1.w != apply_perm(t, c2.w)))
        if best is None or r1 + r2 < best[0]:
            best = (r1 + r2, (s, t), r1, r2)
    return best


def canonical_representative(config: Configuration, sigma: SymmetryGroup) -> Configuration:
    """Lexicographically smallest member of the equivalence class.

    The order compares the row vector first, then the column vector; the
    total order makes this a deterministic class key.
    """
    best_key = None
    best = None
    for s, t in sigma.pairs:
        z = apply_perm(s, config.z)
        w = apply_perm(t, config.w)
        key = (tuple(z.tolist()), tuple(w.tolist()))
        if best_key is None or key < best_key:
            best_key = key
            best = (z, w)
    if config.shared:
        return Configuration(best[0])
    return Configuration(best[0], best[1])


def diff_count(
    c1: Configuration,
    c2: Configuration,
    pi_star: ConnectivityMatrix,
    variant: ModelVariant,
) -> int:
    """Number of index-set cells whose connectivity entries differ
    between the two configurations (exact parameter comparison)."""
    _check_same_dims(c1, c2)
    eff = pi_star.effective()
    fam = pi_star.family
    mask = index_mask(variant, c1.n, c1.m)
    p1 = eff[np.ix_(c1.z, c1.w)]
    p2 = eff[np.ix_(c2.z, c2.w)]
    neq = ~fam.params_equal(p1, p2)
    return int(np.count_nonzero(neq & mask))


def check_bound_number(
    c_good: Configuration,
    c_other: Configuration,
    pi_star: ConnectivityMatrix,
    sigma: SymmetryGroup,
    mu_min: float,
    variant: ModelVariant,
) -> tuple[bool, int, float]:
    """Evaluate the difference-count lower bound for one pair.

    ``c_good`` plays the role of the well-balanced configuration; the
    left side is the number of differing cells, the right side is
    mu_min^2 / 8 * (m r1 + n r2) with the split taken from the quotient
    distance of ``c_other`` to ``c_good``.  Returns (holds, lhs, rhs).
    """
    n, m = c_good.n, c_good.m
    nq = np.bincount(c_good.z, minlength=sigma.Q)
    nl = np.bincount(c_good.w, minlength=sigma.L)
    if np.any(nq < n * mu_min / 2.0) or np.any(nl < m * mu_min / 2.0):
        raise TheoryPreconditionError("the reference configuration is not well-balanced")
    lhs = diff_count(c_other, c_good, pi_star, variant)
    _, _, r1, r2 = config_distance(c_other, c_good, sigma)
    rhs = mu_min**2 / 8.0 * (m * r1 + n * r2)
    return (lhs >= rhs - 1e-12, lhs, rhs)
