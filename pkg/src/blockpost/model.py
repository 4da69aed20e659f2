"""Block-model parameter space, latent configurations and data generation.

The two model flavours share one code path:

* bipartite (rectangular) models where rows and columns carry
  independent group labels and every cell of the n x m rectangle is
  observed;
* graph (square) models where rows and columns are the same objects,
  the two label vectors coincide, and the index set is the full square,
  the square minus its diagonal, or the strict upper triangle.

Group labels are 0-based internally; all file and CLI I/O is 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .families import Family

__all__ = [
    "ModelVariant",
    "ConnectivityMatrix",
    "ModelSpec",
    "Configuration",
    "ObservationMatrix",
    "index_mask",
    "make_rng",
    "derive_seed",
    "sample_configuration",
    "sample_observations",
    "group_counts",
    "in_good_set",
    "good_set_probability_bound",
    "block_pair_counts",
]


@dataclass(frozen=True)
class ModelVariant:
    """Model flavour: bipartite rectangle or graph adjacency matrix.

    ``kind`` is "lbm" or "sbm".  For the graph case, ``directed`` and
    ``self_loops`` select the index set: directed with self-loops uses
    the full square, directed without drops the diagonal, undirected
    uses the strict upper triangle (and implies no self-loops).
    """

    kind: str
    directed: bool = True
    self_loops: bool = True

    def __post_init__(self):
        if self.kind not in ("lbm", "sbm"):
            raise SpecError(f"variant kind must be 'lbm' or 'sbm', got {self.kind!r}")
        if self.kind == "sbm" and not self.directed and self.self_loops:
            raise SpecError("undirected graph variant cannot keep self-loops")

    @property
    def is_sbm(self) -> bool:
        return self.kind == "sbm"

    @property
    def index_set_name(self) -> str:
        if self.kind == "lbm":
            return "full"
        if not self.directed:
            return "upper"
        return "full" if self.self_loops else "no_diag"

    def to_dict(self) -> dict:
        if self.kind == "lbm":
            return {"kind": "lbm"}
        return {"kind": "sbm", "directed": self.directed, "self_loops": self.self_loops}

    @staticmethod
    def from_dict(d: dict) -> "ModelVariant":
        if not isinstance(d, dict) or "kind" not in d:
            raise SpecError(f"variant must be a dict with a 'kind' key, got {d!r}")
        if d["kind"] == "lbm":
            return ModelVariant("lbm")
        return ModelVariant(
            "sbm",
            directed=bool(d.get("directed", True)),
            self_loops=bool(d.get("self_loops", True)),
        )

    @staticmethod
    def lbm() -> "ModelVariant":
        return ModelVariant("lbm")

    @staticmethod
    def sbm(directed: bool = True, self_loops: bool = True) -> "ModelVariant":
        return ModelVariant("sbm", directed=directed, self_loops=self_loops)


def index_mask(variant: ModelVariant, n: int, m: int) -> np.ndarray:
    """Boolean (n, m) mask of the observed index set."""
    if n < 1 or m < 1:
        raise SpecError(f"matrix dimensions must be positive, got ({n}, {m})")
    if variant.kind == "lbm":
        return np.ones((n, m), dtype=bool)
    if n != m:
        raise SpecError(f"graph variant requires n == m, got ({n}, {m})")
    mask = np.ones((n, n), dtype=bool)
    if not variant.directed:
        return np.triu(mask, k=1)
    if not variant.self_loops:
        np.fill_diagonal(mask, False)
    return mask


class ConnectivityMatrix:
    """Q x L array of cell-distribution parameters, with an optional
    global sparsity factor applied multiplicatively to the probability
    part (the whole entry for binary cells, the sparsity coordinate for
    zero-inflated ones).

    ``values`` holds the *unscaled* entries; bounds are checked on the
    unscaled values so that a vanishing scale keeps the parametrization
    well-posed.
    """

    def __init__(self, values, family: Family, scale: float | None = None):
        values = np.array(values, dtype=float)
        expected_ndim = 2 if family.param_dim == 1 else 3
        if values.ndim != expected_ndim:
            raise SpecError(
                f"connectivity values for family {family.name!r} must have "
                f"{expected_ndim} axes, got shape {values.shape}"
            )
        if family.param_dim > 1 and values.shape[-1] != family.param_dim:
            raise SpecError(
                f"trailing parameter axis must have length {family.param_dim}, "
                f"got {values.shape[-1]}"
            )
        if scale is not None and not (0.0 < scale <= 1.0):
            raise SpecError(f"sparsity scale must lie in (0, 1], got {scale}")
        family.validate_param(values)
        if scale is not None and family.name not in ("bernoulli", "zero_inflated"):
            raise SpecError(
                f"sparsity scale only applies to bernoulli or zero-inflated cells, "
                f"not {family.name!r}"
            )
        self.values = values
        self.values.flags.writeable = False
        self.family = family
        self.scale = None if scale is None else float(scale)

    @property
    def Q(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    def effective(self) -> np.ndarray:
        """Entries with the sparsity scale applied."""
        if self.scale is None:
            return self.values
        out = self.values.copy()
        if self.family.name == "bernoulli":
            out *= self.scale
        else:  # zero_inflated: scale the sparsity coordinate only
            out[..., 0] *= self.scale
        out.flags.writeable = False
        return out

    def entry(self, q: int, l: int):
        return self.effective()[q, l]

    def with_scale(self, scale: float | None) -> "ConnectivityMatrix":
        return ConnectivityMatrix(self.values, self.family, scale=scale)

    def with_values(self, values) -> "ConnectivityMatrix":
        return ConnectivityMatrix(values, self.family, scale=self.scale)

    def __eq__(self, other):
        return (
            isinstance(other, ConnectivityMatrix)
            and self.family == other.family
            and self.scale == other.scale
            and self.values.shape == other.values.shape
            and bool(np.all(self.values == other.values))
        )

    def __repr__(self):  # pragma: no cover - cosmetic
        return (
            f"ConnectivityMatrix(Q={self.Q}, L={self.L}, family={self.family.name}, "
            f"scale={self.scale})"
        )


class Configuration:
    """Latent assignment of rows (and columns) to groups, 0-based.

    In the graph case ``w`` is the row vector itself, so the two views
    can never disagree; arrays are frozen after construction.
    """

    def __init__(self, z, w=None):
        z = np.asarray(z, dtype=np.int64).copy()
        if z.ndim != 1 or z.size < 1:
            raise SpecError("row labels must form a nonempty 1-d vector")
        if np.any(z < 0):
            raise SpecError("internal labels are 0-based and nonnegative")
        z.flags.writeable = False
        self._z = z
        if w is None:
            self._w = z
        else:
            w = np.asarray(w, dtype=np.int64).copy()
            if w.ndim != 1 or w.size < 1:
                raise SpecError("column labels must form a nonempty 1-d vector")
            if np.any(w < 0):
                raise SpecError("internal labels are 0-based and nonnegative")
            w.flags.writeable = False
            self._w = w

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def w(self) -> np.ndarray:
        return self._w

    @property
    def n(self) -> int:
        return self._z.size

    @property
    def m(self) -> int:
        return self._w.size

    @property
    def shared(self) -> bool:
        """True when columns are literally the row vector (graph case)."""
        return self._w is self._z

    @staticmethod
    def from_one_based(z, w=None) -> "Configuration":
        z = np.asarray(z, dtype=np.int64) - 1
        if w is None:
            return Configuration(z)
        return Configuration(z, np.asarray(w, dtype=np.int64) - 1)

    def one_based(self) -> tuple[list[int], list[int]]:
        return (self._z + 1).tolist(), (self._w + 1).tolist()

    def key(self) -> tuple:
        return (tuple(self._z.tolist()), tuple(self._w.tolist()))

    def __eq__(self, other):
        return isinstance(other, Configuration) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):  # pragma: no cover - cosmetic
        if self.shared:
            return f"Configuration(z={self._z.tolist()})"
        return f"Configuration(z={self._z.tolist()}, w={self._w.tolist()})"


class ModelSpec:
    """Full model parameter: variant, group counts, proportions,
    connectivity matrix and observation family.

    Graph variants force Q == L and identical row/column proportions.
    """

    def __init__(self, variant: ModelVariant, alpha, beta, pi: ConnectivityMatrix):
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if alpha.ndim != 1 or beta.ndim != 1:
            raise SpecError("group proportions must be 1-d vectors")
        for name, vec in (("alpha", alpha), ("beta", beta)):
            if np.any(vec <= 0.0):
                raise SpecError(f"all {name} entries must be strictly positive")
            if abs(vec.sum() - 1.0) > 1e-12:
                raise SpecError(f"{name} must sum to 1 within 1e-12, got {vec.sum()!r}")
        if variant.is_sbm:
            if alpha.size != beta.size or np.any(alpha != beta):
                raise SpecError("graph variant requires identical row/column proportions")
            if not variant.directed:
                eff = pi.effective()
                if pi.family.param_dim == 1:
                    sym = np.array_equal(eff, eff.T)
                else:
                    sym = np.array_equal(eff, np.swapaxes(eff, 0, 1))
                if not sym:
                    raise SpecError("undirected graph variant needs a symmetric connectivity matrix")
        if pi.Q != alpha.size or pi.L != beta.size:
            raise SpecError(
                f"connectivity shape ({pi.Q}, {pi.L}) does not match proportions "
                f"({alpha.size}, {beta.size})"
            )
        alpha = alpha.copy()
        beta = beta.copy()
        alpha.flags.writeable = False
        beta.flags.writeable = False
        self.variant = variant
        self.alpha = alpha
        self.beta = beta
        self.pi = pi
        self.family = pi.family

    @property
    def Q(self) -> int:
        return self.alpha.size

    @property
    def L(self) -> int:
        return self.beta.size

    @property
    def mu_min(self) -> float:
        return float(min(self.alpha.min(), self.beta.min()))

    @property
    def mu_max(self) -> float:
        return float(max(self.alpha.max(), self.beta.max()))

    def identifiability_ok(self) -> bool:
        """No two rows of the connectivity matrix identical, and no two
        columns identical (exact comparison on effective entries)."""
        eff = self.pi.effective()
        fam = self.family
        for q in range(self.Q):
            for q2 in range(q + 1, self.Q):
                if bool(np.all(fam.params_equal(eff[q], eff[q2]))):
                    return False
        for l in range(self.L):
            for l2 in range(l + 1, self.L):
                if bool(np.all(fam.params_equal(eff[:, l], eff[:, l2]))):
                    return False
        return True

    def with_pi(self, pi: ConnectivityMatrix) -> "ModelSpec":
        return ModelSpec(self.variant, self.alpha, self.beta, pi)


class ObservationMatrix:
    """Observed data over the model's index set.

    Stored densely; cells outside the index set hold NaN.  For the
    undirected graph case the accessor symmetrizes on read.
    """

    def __init__(self, values: np.ndarray, variant: ModelVariant):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise SpecError("observations must form a 2-d array")
        self.variant = variant
        self.mask = index_mask(variant, values.shape[0], values.shape[1])
        vals = np.where(self.mask, values, np.nan)
        vals.flags.writeable = False
        self.values = vals

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def value(self, i: int, j: int) -> float:
        """Cell accessor; symmetrizes in the undirected graph case."""
        if self.mask[i, j]:
            return float(self.values[i, j])
        if self.variant.is_sbm and not self.variant.directed and i != j and self.mask[j, i]:
            return float(self.values[j, i])
        raise KeyError(f"cell ({i}, {j}) is outside the index set")

    def observed(self) -> np.ndarray:
        """Flat vector of observed cell values, row-major over the index set."""
        return self.values[self.mask]

    def check_support(self, family: Family) -> None:
        ok = family.support_contains(self.observed())
        if not bool(np.all(ok)):
            raise SpecError(f"observed values outside the support of {family.name}")


# ----------------------------------------------------------------------
# randomness


def derive_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic child seed for a purpose key, independent of call order."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator (Philox) from a seed or SeedSequence.

    All sampling routines consume cells in canonical row-major order, so
    every draw is a fixed function of (seed, position): reruns are
    bit-exact and independent of any shared state.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


# ----------------------------------------------------------------------
# sampling and counting


def sample_configuration(spec: ModelSpec, n: int, m: int, seed) -> Configuration:
    """Draw latent labels: rows i.i.d. from alpha, columns i.i.d. from
    beta; the graph case draws rows only and shares the vector."""
    if n < 1 or m < 1:
        raise SpecError(f"dimensions must be positive, got ({n}, {m})")
    if spec.variant.is_sbm and n != m:
        raise SpecError(f"graph variant requires n == m, got ({n}, {m})")
    rng = make_rng(seed)
    z = _sample_labels(spec.alpha, n, rng)
    if spec.variant.is_sbm:
        return Configuration(z)
    w = _sample_labels(spec.beta, m, rng)
    return Configuration(z, w)


def _sample_labels(probs: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(probs)
    u = rng.random(count)
    return np.searchsorted(cum, u, side="right").clip(0, probs.size - 1)


def sample_observations(spec: ModelSpec, config: Configuration, seed) -> ObservationMatrix:
    """Draw the data matrix conditional on the configuration.

    Cells are independent given the labels; cell (i, j) follows the
    family at the (row-group, column-group) connectivity entry.  Only
    index-set cells are drawn, in row-major order.
    """
    n, m = config.n, config.m
    mask = index_mask(spec.variant, n, m)
    eff = spec.pi.effective()
    if np.max(config.z) >= spec.Q or np.max(config.w) >= spec.L:
        raise SpecError("configuration labels exceed the number of groups")
    params = eff[np.ix_(config.z, config.w)]  # (n, m) or (n, m, d)
    flat_params = params[mask]
    rng = make_rng(seed)
    draws = spec.family.sample(flat_params, rng)
    values = np.zeros((n, m), dtype=float)
    values[mask] = draws
    return ObservationMatrix(values, spec.variant)


def group_counts(config: Configuration, Q: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupancy counts: rows per group and columns per group."""
    nq = np.bincount(config.z, minlength=Q)
    nl = np.bincount(config.w, minlength=L)
    if nq.size > Q or nl.size > L:
        raise SpecError("configuration labels exceed the number of groups")
    return nq, nl


def in_good_set(config: Configuration, spec: ModelSpec) -> bool:
    """True when every row group holds at least n*mu_min/2 rows and
    every column group at least m*mu_min/2 columns."""
    nq, nl = group_counts(config, spec.Q, spec.L)
    mu = spec.mu_min
    return bool(np.all(nq >= config.n * mu / 2.0) and np.all(nl >= config.m * mu / 2.0))


def good_set_probability_bound(spec: ModelSpec, n: int, m: int) -> float:
    """Lower bound on the probability that a sampled configuration is
    well-balanced (Hoeffding union bound); graph case uses its sharper
    form."""
    import math

    if spec.variant.is_sbm:
        a_min = float(spec.alpha.min())
        return 1.0 - 2.0 * spec.Q * math.exp(-n * a_min**2 / 2.0)
    mu = spec.mu_min
    return 1.0 - 2.0 * spec.Q * spec.L * math.exp(-min(n, m) * mu**2 / 2.0)


def block_pair_counts(
    mask: np.ndarray,
    z1: np.ndarray,
    w1: np.ndarray,
    z2: np.ndarray,
    w2: np.ndarray,
    Q: int,
    L: int,
) -> np.ndarray:
    """Count cells of the index set by joint block membership.

    Returns a (Q, L, Q, L) integer array whose [q1, l1, q2, l2] entry is
    the number of cells (i, j) in the index set with z1_i == q1,
    w1_j == l1, z2_i == q2, w2_j == l2.  This is the common kernel for
    parameter-difference counts and expected log-ratio sums.
    """
    n, m = mask.shape
    a = z1 * Q + z2  # row combo in [0, Q^2)
    b = w1 * L + w2  # col combo in [0, L^2)
    A = np.zeros((n, Q * Q))
    A[np.arange(n), a] = 1.0
    B = np.zeros((m, L * L))
    B[np.arange(m), b] = 1.0
    counts = A.T @ mask.astype(float) @ B  # (Q^2, L^2)
    counts = counts.reshape(Q, Q, L, L).transpose(0, 2, 1, 3)
    return np.rint(counts).astype(np.int64)


