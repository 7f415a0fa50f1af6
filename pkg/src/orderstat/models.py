"""Joint laws of random vectors X = (X_1, ..., X_n) and their samplers.

Randomness is organised in fixed-size blocks of draws.  Block ``b`` of
stream ``stream_id`` under ``seed`` is produced by a Philox generator keyed
by ``SeedSequence(seed, spawn_key=(stream_id, b))``, so any block can be
regenerated independently and the concatenation of blocks does not depend on
how the work was split across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from . import marginals as mg
from .errors import CapabilityError, ConfigError, EstimationError, ModelError
from .marginals import Marginal

# Target number of matrix entries per block.
BLOCK_ELEMENTS = 1 << 18
PSD_TOL = 1e-10


def block_rows(n: int) -> int:
    return max(1, BLOCK_ELEMENTS // max(n, 1))


def block_generator(seed: int, stream_id: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(block)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleBatch:
    """Rows are independent draws of X."""

    draws: np.ndarray
    seed: int
    stream_id: int

    @property
    def count(self) -> int:
        return self.draws.shape[0]


class VectorModel:
    """Base class for joint laws.

    Subclasses are frozen dataclasses and define ``n``, ``_sample_raw``,
    ``_marginal_raw`` and the structural flags.  ``weights`` (if any) are
    applied coordinate-wise after sampling: the model is then the law of
    ``(a_1 X_1, ..., a_n X_n)``.
    """

    kind: str = ""
    weights: tuple[float, ...] | None

    # --- to implement ---------------------------------------------------
    @property
    def n(self) -> int:
        raise NotImplementedError

    def _sample_raw(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        raise NotImplementedError

    def _marginal_raw(self, i: int) -> Marginal:
        raise CapabilityError(f"{self.kind}: marginal {i} not in catalog")

    def _params(self) -> dict[str, Any]:
        return {}

    # structural flags of the unweighted law
    _independent = False
    _uncorrelated = False
    _log_concave = True
    _sign_invariant = False

    # --- sampling -------------------------------------------------------
    def _weights_array(self) -> np.ndarray | None:
        return None if self.weights is None else np.asarray(self.weights, dtype=float)

    def sample_block(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        x = self._sample_raw(rng, rows)
        w = self._weights_array()
        return x if w is None else x * w

    def sample_abs_block(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        """Draws of ``(|X_1|, ..., |X_n|)``; may be a read-only broadcast view."""
        return np.abs(self.sample_block(rng, rows))

    def iter_blocks(self, count: int, seed: int, stream_id: int = 0, absolute: bool = False):
        rpb = block_rows(self.n)
        nblocks = math.ceil(count / rpb)
        for b in range(nblocks):
            rows = min(rpb, count - b * rpb)
            rng = block_generator(seed, stream_id, b)
            yield self.sample_abs_block(rng, rows) if absolute else self.sample_block(rng, rows)

    def sample(self, count: int, seed: int, stream_id: int = 0) -> SampleBatch:
        if count < 1:
            raise EstimationError("count must be >= 1")
        draws = np.concatenate(list(self.iter_blocks(count, seed, stream_id)), axis=0)
        return SampleBatch(draws, int(seed), int(stream_id))

    # --- marginals and flags ----------------------------------------------
    def marginal_of(self, i: int) -> Marginal:
        if not 0 <= i < self.n:
            raise CapabilityError(f"coordinate {i} out of range for n={self.n}")
        m = self._marginal_raw(i)
        return m if self.weights is None else mg.scaled(m, self.weights[i])

    def marginals(self) -> list[Marginal]:
        return [self.marginal_of(i) for i in range(self.n)]

    @property
    def is_log_concave(self) -> bool:
        return self._log_concave

    @property
    def has_independent_coordinates(self) -> bool:
        return self._independent

    @property
    def has_uncorrelated_coordinates(self) -> bool:
        return self._uncorrelated

    @property
    def is_mean_zero(self) -> bool:
        try:
            return all(m.centered for m in self.marginals())
        except CapabilityError:
            return False

    @property
    def is_symmetric(self) -> bool:
        """Law invariant under X -> -X."""
        try:
            return self._sign_invariant or self.kind in ("gaussian_covariance", "fully_correlated_gaussian") \
                or all(m.symmetric for m in self.marginals())
        except CapabilityError:
            return False

    @property
    def is_unconditional(self) -> bool:
        return self._sign_invariant

    @property
    def is_isotropic(self) -> bool:
        if not (self._uncorrelated and self.is_mean_zero):
            return False
        return all(abs(m.variance() - 1.0) <= 1e-9 for m in self.marginals())

    @property
    def negcorr_alpha(self) -> float | None:
        """Analytically known constant in the joint-tail condition, if any."""
        return 1.0 if self._independent else None

    # --- description ------------------------------------------------------
    def to_config(self) -> dict[str, Any]:
        cfg: dict[str, Any] = {"kind": self.kind, "n": self.n, "params": self._params()}
        if self.weights is not None:
            cfg["weights"] = list(self.weights)
        return cfg

    def key(self) -> str:
        """Stable content hash of the configuration."""
        cached = self.__dict__.get("_key")
        if cached is None:
            blob = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
            cached = hashlib.sha256(blob.encode()).hexdigest()[:16]
            self.__dict__["_key"] = cached
        return cached

    def describe(self) -> str:
        return f"{self.kind}(n={self.n})"

    def with_weights(self, weights: Sequence[float] | None) -> VectorModel:
        import dataclasses
        w = None if weights is None else tuple(float(a) for a in weights)
        if w is not None and len(w) != self.n:
            raise ModelError(f"expected {self.n} weights, got {len(w)}")
        return dataclasses.replace(self, weights=w)

    def _check_weights(self):
        if self.weights is not None and len(self.weights) != self.n:
            raise ModelError(f"expected {self.n} weights, got {len(self.weights)}")


@dataclass(frozen=True)
class IndependentProduct(VectorModel):
    components: tuple[Marginal, ...]
    weights: tuple[float, ...] | None = None

    kind = "independent"
    _independent = True
    _uncorrelated = True

    def __post_init__(self):
        if len(self.components) < 1:
            raise ModelError("need at least one marginal")
        object.__setattr__(self, "components", tuple(self.components))
        self._check_weights()

    @classmethod
    def iid(cls, m: Marginal, n: int, weights=None) -> IndependentProduct:
        return cls(tuple([m] * n), None if weights is None else tuple(weights))

    @property
    def n(self):
        return len(self.components)

    @cached_property
    def _groups(self) -> list[tuple[Marginal, np.ndarray]]:
        order: dict[Marginal, list[int]] = {}
        for i, m in enumerate(self.components):
            order.setdefault(m, []).append(i)
        return [(m, np.asarray(idx)) for m, idx in order.items()]

    def _sample_raw(self, rng, rows):
        out = np.empty((rows, self.n))
        groups = self._groups
        if len(groups) == 1:
            return groups[0][0].sample(rng, (rows, self.n))
        for m, idx in groups:
            out[:, idx] = m.sample(rng, (rows, len(idx)))
        return out

    def _marginal_raw(self, i):
        return self.components[i]

    @property
    def _sign_invariant(self):  # type: ignore[override]
        return all(m.symmetric for m in self.components)

    def _params(self):
        uniq = {m for m in self.components}
        if len(uniq) == 1:
            return {"marginal": self.components[0].to_config()}
        return {"marginals": [m.to_config() for m in self.components]}

    def describe(self):
        uniq = {m for m in self.components}
        if len(uniq) == 1:
            return f"iid[{self.components[0].label()}](n={self.n})"
        return f"independent(n={self.n})"


@dataclass(frozen=True)
class GaussianCovariance(VectorModel):
    """Centred Gaussian vector with covariance ``cov`` (dense, row-major tuples)."""

    cov: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...] | None = None
    ar: float | None = None

    kind = "gaussian_covariance"

    def __post_init__(self):
        c = np.asarray(self.cov, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ModelError("covariance must be a nonempty square matrix")
        if not np.allclose(c, c.T, atol=PSD_TOL, rtol=0):
            raise ModelError("covariance is not symmetric")
        object.__setattr__(self, "cov", tuple(tuple(float(v) for v in row) for row in c))
        self._check_weights()
        _ = self._factor

    @classmethod
    def from_array(cls, cov, weights=None, ar=None) -> GaussianCovariance:
        return cls(tuple(map(tuple, np.asarray(cov, dtype=float))), weights, ar)

    @classmethod
    def diag(cls, variances, weights=None) -> GaussianCovariance:
        return cls.from_array(np.diag(np.asarray(variances, dtype=float)), weights)

    @classmethod
    def ar1(cls, n: int, rho: float, weights=None) -> GaussianCovariance:
        idx = np.arange(n)
        return cls.from_array(rho ** np.abs(idx[:, None] - idx[None, :]), weights, ar=float(rho))

    @property
    def n(self):
        return len(self.cov)

    @cached_property
    def _matrix(self) -> np.ndarray:
        return np.asarray(self.cov, dtype=float)

    @cached_property
    def _factor(self) -> np.ndarray:
        """Symmetric square root of the covariance."""
        vals, vecs = np.linalg.eigh(self._matrix)
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.any(vals < -PSD_TOL * scale):
            raise ModelError(f"covariance not positive semidefinite (min eigenvalue {vals.min():.3g})")
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    @cached_property
    def _diagonal(self) -> bool:
        m = self._matrix
        return bool(np.all(m[~np.eye(self.n, dtype=bool)] == 0.0))

    @property
    def _independent(self):  # type: ignore[override]
        return self._diagonal

    @property
    def _uncorrelated(self):  # type: ignore[override]
        return self._diagonal

    @property
    def _sign_invariant(self):  # type: ignore[override]
        return self._diagonal

    def _sample_raw(self, rng, rows):
        z = rng.standard_normal((rows, self.n))
        return z @ self._factor

    def _marginal_raw(self, i):
        var = self._matrix[i, i]
        if var <= 0:
            return mg.PointScaledCopy(mg.Gaussian(1.0), 0.0)
        return mg.Gaussian(math.sqrt(var))

    def _params(self):
        m = self._matrix
        if self.ar is not None:
            return {"ar": self.ar}
        if self._diagonal:
            return {"diag": list(np.diag(m))}
        return {"covariance": [list(r) for r in self.cov]}

    def describe(self):
        if self.ar is not None:
            return f"gaussian[ar({self.ar:g})](n={self.n})"
        return f"gaussian_cov(n={self.n})"


@dataclass(frozen=True)
class SignSharedGaussian(VectorModel):
    """(eps_1 g, ..., eps_n g) with independent Rademacher signs."""

    dim: int
    weights: tuple[float, ...] | None = None

    kind = "sign_shared_gaussian"
    _uncorrelated = True
    _sign_invariant = True
    # only the marginals are log-concave; the joint law lives on 2^n lines
    _log_concave = False

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError("n must be >= 1")
        self._check_weights()

    @property
    def n(self):
        return self.dim

    def _sample_raw(self, rng, rows):
        g = rng.standard_normal(rows)
        signs = rng.integers(0, 2, (rows, self.n), dtype=np.int8) * 2 - 1
        return signs * g[:, None]

    def sample_abs_block(self, rng, rows):
        # the signs are drawn after g and each block owns its generator, so skipping them leaves |X| unchanged
        g = rng.standard_normal(rows)
        return _row_constant(np.abs(g), self.n, self._weights_array())

    def _marginal_raw(self, i):
        return mg.Gaussian(1.0)

    def describe(self):
        return f"example1(n={self.n})"


@dataclass(frozen=True)
class FullyCorrelatedGaussian(VectorModel):
    """(g, ..., g)."""

    dim: int
    weights: tuple[float, ...] | None = None

    kind = "fully_correlated_gaussian"

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError("n must be >= 1")
        self._check_weights()

    @property
    def n(self):
        return self.dim

    @property
    def _uncorrelated(self):  # type: ignore[override]
        return self.dim == 1

    @property
    def _independent(self):  # type: ignore[override]
        return self.dim == 1

    @property
    def _sign_invariant(self):  # type: ignore[override]
        return self.dim == 1

    def _sample_raw(self, rng, rows):
        g = rng.standard_normal(rows)
        return np.repeat(g[:, None], self.n, axis=1)

    def sample_abs_block(self, rng, rows):
        g = rng.standard_normal(rows)
        return _row_constant(np.abs(g), self.n, self._weights_array())

    def _marginal_raw(self, i):
        return mg.Gaussian(1.0)

    def describe(self):
        return f"example2(n={self.n})"


@dataclass(frozen=True)
class UniformCube(VectorModel):
    """Uniform law on ``[-a, a]^n``; ``a = sqrt(3)`` is isotropic."""

    dim: int
    a: float = math.sqrt(3.0)
    weights: tuple[float, ...] | None = None

    kind = "uniform_cube"
    _independent = True
    _uncorrelated = True
    _sign_invariant = True

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError("n must be >= 1")
        mg.Uniform(self.a)
        self._check_weights()

    @property
    def n(self):
        return self.dim

    def _sample_raw(self, rng, rows):
        return rng.uniform(-self.a, self.a, (rows, self.n))

    def _marginal_raw(self, i):
        return mg.Uniform(self.a)

    def _params(self):
        return {"a": self.a}

    def describe(self):
        return f"uniform_cube({self.a:.4g})(n={self.n})"


@dataclass(frozen=True)
class Decoupled(VectorModel):
    """Independent coordinates with the marginals of ``base``."""

    base: VectorModel
    weights: tuple[float, ...] | None = None

    kind = "decoupled"
    _independent = True
    _uncorrelated = True

    def __post_init__(self):
        self._check_weights()

    @property
    def n(self):
        return self.base.n

    @cached_property
    def _product(self) -> IndependentProduct | None:
        try:
            return IndependentProduct(tuple(self.base.marginals()))
        except CapabilityError:
            return None

    def _sample_raw(self, rng, rows):
        if self._product is not None:
            return self._product._sample_raw(rng, rows)
        # generic route: n independent copies of the base, keep the diagonal
        out = np.empty((rows, self.n))
        for i in range(self.n):
            out[:, i] = self.base.sample_block(rng, rows)[:, i]
        return out

    def _marginal_raw(self, i):
        return self.base.marginal_of(i)

    @property
    def _log_concave(self):  # type: ignore[override]
        return True

    @property
    def _sign_invariant(self):  # type: ignore[override]
        return self.is_symmetric

    @property
    def is_symmetric(self):  # type: ignore[override]
        try:
            return all(m.symmetric for m in self.base.marginals())
        except CapabilityError:
            return False

    def _params(self):
        return {"base": self.base.to_config()}

    def describe(self):
        return f"decoupled[{self.base.describe()}]"


def _row_constant(col: np.ndarray, n: int, weights: np.ndarray | None) -> np.ndarray:
    if weights is None:
        return np.broadcast_to(col[:, None], (col.shape[0], n))
    return col[:, None] * np.abs(weights)[None, :]


def sample(model: VectorModel, count: int, seed: int, stream_id: int = 0) -> SampleBatch:
    return model.sample(count, seed, stream_id)


def marginal_of(model: VectorModel, i: int) -> Marginal:
    return model.marginal_of(i)


@dataclass(frozen=True)
class AlphaEstimate:
    """Empirical sup of P(|X_i|>=s, |X_j|>=t) / (P(|X_i|>=s) P(|X_j|>=t))."""

    alpha: float
    stderr: float
    pair: tuple[int, int]
    cell: tuple[float, float]
    cells_used: int
    cells: list[tuple[int, int, float, float, float, float]] = field(default_factory=list, repr=False)


def estimate_negcorr_alpha(model: VectorModel, grid: Sequence[float], count: int, seed: int,
                           max_pairs: int = 32, stream_id: int = 11) -> AlphaEstimate:
    """Empirical joint-tail overshoot constant over sampled coordinate pairs.

    Cells where either marginal survival is below ``10 / sqrt(count)`` are
    skipped.  The returned ``stderr`` is the delta-method standard error of
    the maximising cell.
    """
    if model.n < 2:
        raise EstimationError("need n >= 2 for pairwise estimation")
    grid = np.asarray(sorted(float(g) for g in grid))
    x = np.abs(model.sample(count, seed, stream_id).draws)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream_id, 1 << 20)))
    all_pairs = model.n * (model.n - 1) // 2
    if all_pairs <= max_pairs:
        pairs = [(i, j) for i in range(model.n) for j in range(i + 1, model.n)]
    else:
        pairs = set()
        while len(pairs) < max_pairs:
            i, j = rng.choice(model.n, 2, replace=False)
            pairs.add((int(min(i, j)), int(max(i, j))))
        pairs = sorted(pairs)
    floor = 10.0 / math.sqrt(count)
    cells = []
    for i, j in pairs:
        ind_i = x[:, i][:, None] >= grid[None, :]
        ind_j = x[:, j][:, None] >= grid[None, :]
        p_i = ind_i.mean(axis=0)
        p_j = ind_j.mean(axis=0)
        joint = (ind_i.T.astype(float) @ ind_j.astype(float)) / count
        for a, s in enumerate(grid):
            for b, t in enumerate(grid):
                if p_i[a] < floor or p_j[b] < floor:
                    continue
                ratio = joint[a, b] / (p_i[a] * p_j[b])
                se = math.sqrt(max(joint[a, b] * (1 - joint[a, b]), 0.0) / count) / (p_i[a] * p_j[b])
                cells.append((i, j, float(s), float(t), float(ratio), se))
    if not cells:
        raise EstimationError("every grid cell has marginal survival below 10/sqrt(count)")
    best = max(cells, key=lambda c: c[4])
    return AlphaEstimate(best[4], best[5], (best[0], best[1]), (best[2], best[3]), len(cells), cells)


# --- configuration ----------------------------------------------------------

_KIND_ALIASES = {
    "independent": "independent",
    "independent_product": "independent",
    "iid": "independent",
    "gaussian_covariance": "gaussian_covariance",
    "gaussian": "gaussian_covariance",
    "sign_shared_gaussian": "sign_shared_gaussian",
    "example1": "sign_shared_gaussian",
    "fully_correlated_gaussian": "fully_correlated_gaussian",
    "example2": "fully_correlated_gaussian",
    "uniform_cube": "uniform_cube",
    "decoupled": "decoupled",
}


def model_from_config(cfg: dict[str, Any]) -> VectorModel:
    """Build a model from ``{"kind", "n", "params", "weights"}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"model config needs a 'kind' key: {cfg!r}")
    kind = _KIND_ALIASES.get(str(cfg["kind"]).lower())
    params = dict(cfg.get("params") or {})
    weights = cfg.get("weights")
    weights = None if weights is None else tuple(float(w) for w in weights)
    n = cfg.get("n")
    try:
        if kind == "independent":
            if "marginals" in params:
                comps = tuple(mg.marginal_from_config(m) for m in params["marginals"])
                if n is not None and int(n) != len(comps):
                    raise ModelError(f"n={n} but {len(comps)} marginals given")
                return IndependentProduct(comps, weights)
            return IndependentProduct.iid(mg.marginal_from_config(params["marginal"]), int(n), weights)
        if kind == "gaussian_covariance":
            if "diag" in params:
                return GaussianCovariance.diag(params["diag"], weights)
            if "ar" in params:
                return GaussianCovariance.ar1(int(n), float(params["ar"]), weights)
            cov = np.asarray(params["covariance"], dtype=float)
            if cov.ndim == 1:
                side = int(round(math.sqrt(cov.size)))
                cov = cov.reshape(side, side)
            return GaussianCovariance.from_array(cov, weights)
        if kind == "sign_shared_gaussian":
            return SignSharedGaussian(int(n), weights)
        if kind == "fully_correlated_gaussian":
            return FullyCorrelatedGaussian(int(n), weights)
        if kind == "uniform_cube":
            return UniformCube(int(n), float(params.get("a", math.sqrt(3.0))), weights)
        if kind == "decoupled":
            return Decoupled(model_from_config(params["base"]), weights)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad model config {cfg!r}: {exc}") from exc
    raise ConfigError(f"unknown model kind {cfg['kind']!r}")
