"""Latent Gaussian model assembly for areal count panels.

Turns a model specification plus panel data into everything the fitting
engines consume: the latent-vector layout, the sparse observation map with
log-expected-count offsets, the joint prior precision Q(theta) with its
identifiability constraints and generalized log-determinant bookkeeping,
expected counts, and forward simulation.

Latent layout (enabled blocks in this fixed order):

    intercept(1), covariates(p), time_trend(1),
    spatial_structured(n), spatial_iid(n),
    temporal_rw1(T), temporal_iid(T), interaction(n*T)

The interaction block is area-major: coordinate i*T + t belongs to area i,
year index t.  Counts follow a Poisson likelihood with log link,
lambda = E * exp(eta); a Gaussian likelihood is available as a test hook.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln

from . import gmrf
from .errors import ValidationError
from .graph import (
    AdjacencyGraph,
    StructureMatrix,
    connected_components,
    icar_structure,
    identity_structure,
    rw1_structure,
)

# canonical order of the precision hyperparameters
HYPER_BLOCKS = (
    "spatial_structured",
    "spatial_iid",
    "temporal_rw1",
    "temporal_iid",
    "interaction",
)

FIXED_BLOCKS = ("intercept", "covariates", "time_trend")

# floor applied to degenerate all-zero-count expected values
EXPECTED_FLOOR = 1e-6

# simulated linear predictors above this signal mis-scaled inputs
SIMULATION_ETA_CAP = 30.0


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate) prior on a precision tau.

    On the log scale (z = log tau) the density picks up the Jacobian tau:
    log pi(z) = shape*log(rate) - lgamma(shape) + shape*z - rate*exp(z).
    The package default Gamma(1, 0.0005) reduces to
    log(rate) - rate*tau + log(tau).
    """

    shape: float = 1.0
    rate: float = 5e-4

    def log_density_log_scale(self, z: float) -> float:
        return (self.shape * math.log(self.rate) - gammaln(self.shape)
                + self.shape * z - self.rate * math.exp(z))


@dataclass
class ModelSpec:
    """Which effect blocks are on, their hyperpriors, and data policies."""

    spatial_structured: bool = True
    spatial_iid: bool = True
    temporal_rw1: bool = True
    temporal_iid: bool = True
    interaction: bool = True
    linear_time_trend: bool = False
    covariates: tuple[str, ...] = ()
    hyperpriors: dict = field(default_factory=dict)
    standardize_covariates: bool = True
    expected_policy: str = "internal"  # "internal" | "supplied"
    likelihood: str = "poisson"  # "poisson" | "gaussian" (test hook)
    gaussian_sd: float = 1.0
    fixed_effect_precision: float = 1e-3

    def __post_init__(self):
        self.covariates = tuple(self.covariates)
        if self.expected_policy not in ("internal", "supplied"):
            raise ValidationError(
                f"unknown expected-count policy {self.expected_policy!r}")
        if self.likelihood not in ("poisson", "gaussian"):
            raise ValidationError(f"unknown likelihood {self.likelihood!r}")
        for name in self.active_hyperparameters():
            self.hyperpriors.setdefault(name, GammaPrior())
        for name in self.hyperpriors:
            if name not in HYPER_BLOCKS:
                raise ValidationError(f"hyperprior for unknown block {name!r}")

    def active_hyperparameters(self) -> tuple[str, ...]:
        return tuple(name for name in HYPER_BLOCKS if getattr(self, name))

    def hyperprior_for(self, name: str) -> GammaPrior:
        return self.hyperpriors[name]


@dataclass
class PanelData:
    """Complete rectangular area x year panel.

    ``counts`` uses NaN at unobserved cells; ``observed`` is the
    corresponding mask.  ``expected`` optionally carries a user-supplied
    expected-count surface (the panel file's E column).
    """

    graph: AdjacencyGraph
    years: tuple[int, ...]
    counts: np.ndarray
    observed: np.ndarray
    exposure: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...]
    expected: Optional[np.ndarray] = None

    def __post_init__(self):
        n, T = self.graph.n_areas, len(self.years)
        self.years = tuple(int(y) for y in self.years)
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise ValidationError("years must be strictly increasing")
        self.counts = np.asarray(self.counts, dtype=float)
        self.observed = np.asarray(self.observed, dtype=bool)
        self.exposure = np.asarray(self.exposure, dtype=float)
        self.covariates = np.asarray(self.covariates, dtype=float)
        if self.covariates.size == 0:
            self.covariates = self.covariates.reshape(n, T, 0)
        self.covariate_names = tuple(self.covariate_names)
        if self.counts.shape != (n, T):
            raise ValidationError(
                f"counts shape {self.counts.shape} != (areas, years) {(n, T)}")
        if self.observed.shape != (n, T) or self.exposure.shape != (n, T):
            raise ValidationError("observed/exposure shape mismatch")
        if self.covariates.shape != (n, T, len(self.covariate_names)):
            raise ValidationError("covariate array/name mismatch")
        obs = self.observed
        y = self.counts[obs]
        if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y != np.round(y)):
            raise ValidationError("observed counts must be non-negative integers")
        if np.any(~np.isfinite(self.exposure)) or np.any(self.exposure <= 0):
            raise ValidationError("exposures must be strictly positive")
        if self.expected is not None:
            self.expected = np.asarray(self.expected, dtype=float)
            if self.expected.shape != (n, T):
                raise ValidationError("expected-count surface shape mismatch")
            if np.any(~np.isfinite(self.expected)) or np.any(self.expected <= 0):
                raise ValidationError("supplied expected counts must be positive")

    @property
    def n_areas(self) -> int:
        return self.graph.n_areas

    @property
    def n_years(self) -> int:
        return len(self.years)


@dataclass(frozen=True)
class LayoutBlock:
    name: str
    offset: int
    length: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class LatentLayout:
    """Ordered block offsets of the latent vector."""

    blocks: tuple[LayoutBlock, ...]
    n_areas: int
    n_years: int
    n_covariates: int

    @property
    def total(self) -> int:
        return sum(b.length for b in self.blocks)

    def has(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def block(self, name: str) -> LayoutBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise ValidationError(f"layout has no block {name!r}")

    def slice_of(self, name: str) -> slice:
        return self.block(name).slice


def build_layout(spec: ModelSpec, n: int, T: int, p: int) -> LatentLayout:
    """Lay out the latent vector for ``n`` areas, ``T`` years, ``p`` covariates."""
    if n < 1 or T < 1:
        raise ValidationError(f"need n >= 1 and T >= 1, got n={n}, T={T}")
    if spec.temporal_rw1 and T < 2:
        raise ValidationError("temporal random walk requires at least 2 years")
    sizes = [("intercept", 1)]
    if p > 0:
        sizes.append(("covariates", p))
    if spec.linear_time_trend:
        sizes.append(("time_trend", 1))
    if spec.spatial_structured:
        sizes.append(("spatial_structured", n))
    if spec.spatial_iid:
        sizes.append(("spatial_iid", n))
    if spec.temporal_rw1:
        sizes.append(("temporal_rw1", T))
    if spec.temporal_iid:
        sizes.append(("temporal_iid", T))
    if spec.interaction:
        sizes.append(("interaction", n * T))
    blocks, offset = [], 0
    for name, length in sizes:
        blocks.append(LayoutBlock(name, offset, length))
        offset += length
    return LatentLayout(tuple(blocks), n, T, p)


def expected_counts(panel: PanelData, policy: str = "internal") -> np.ndarray:
    """Expected-count surface E.

    ``supplied`` passes the panel's E column through; ``internal``
    standardizes against the whole panel: E = exposure * (sum of observed
    counts / matching exposure), the grand mean under unit exposure.
    """
    if policy == "supplied":
        if panel.expected is None:
            raise ValidationError("expected policy 'supplied' but panel has no E")
        return panel.expected.copy()
    if policy != "internal":
        raise ValidationError(f"unknown expected-count policy {policy!r}")
    obs = panel.observed
    if not obs.any():
        raise ValidationError("cannot standardize: all counts missing")
    total_exposure = float(panel.exposure[obs].sum())
    if total_exposure <= 0:
        raise ValidationError("total exposure is zero")
    rate = float(panel.counts[obs].sum()) / total_exposure
    if rate <= 0.0:
        warnings.warn(
            f"all observed counts are zero; flooring expected counts at "
            f"{EXPECTED_FLOOR}", stacklevel=2)
        return np.full_like(panel.exposure, EXPECTED_FLOOR)
    return panel.exposure * rate


@dataclass(frozen=True)
class CovariateScaling:
    """Per-covariate location/scale used to map coefficients back to raw units."""

    names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray


def standardize_covariates(panel: PanelData) -> tuple[PanelData, CovariateScaling]:
    """Center and scale each covariate to mean 0, sd 1 over observed cells.

    Uses the sample standard deviation (denominator N-1).  Constant
    covariates are rejected by name.
    """
    obs = panel.observed
    if int(obs.sum()) < 2:
        raise ValidationError("standardization needs at least 2 observed cells")
    p = len(panel.covariate_names)
    means = np.zeros(p)
    sds = np.ones(p)
    x = panel.covariates.copy()
    for j, name in enumerate(panel.covariate_names):
        col = panel.covariates[:, :, j][obs]
        mu = float(col.mean())
        sd = float(col.std(ddof=1))
        if not sd > 0.0:
            raise ValidationError(f"zero variance: {name}")
        means[j], sds[j] = mu, sd
        x[:, :, j] = (panel.covariates[:, :, j] - mu) / sd
    scaling = CovariateScaling(panel.covariate_names, means, sds)
    return replace(panel, covariates=x), scaling


@dataclass(frozen=True)
class ObservationMap:
    """Sparse map from the latent vector to per-cell linear predictors.

    ``design`` covers observed cells only (the likelihood rows);
    ``design_full`` covers every area x year cell in area-major order for
    reporting.  eta = design @ x + offset is log(lambda) per cell.
    """

    design: sp.csr_matrix
    offset: np.ndarray
    y: np.ndarray
    obs_cells: np.ndarray
    design_full: sp.csr_matrix
    offset_full: np.ndarray
    expected: np.ndarray

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]


def assemble_design(panel: PanelData, layout: LatentLayout,
                    expected: np.ndarray) -> ObservationMap:
    """Assemble the observation map; rows are area-major (area, then year)."""
    n, T, p = layout.n_areas, layout.n_years, layout.n_covariates
    if panel.n_areas != n or panel.n_years != T or len(panel.covariate_names) != p:
        raise ValidationError("panel dimensions do not match the layout")
    expected = np.asarray(expected, dtype=float)
    if expected.shape != (n, T):
        raise ValidationError("expected-count surface shape mismatch")

    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    t_center = 0.5 * (T + 1)
    for i in range(n):
        for t in range(T):
            r = i * T + t
            put(r, layout.block("intercept").offset, 1.0)
            if p > 0:
                off = layout.block("covariates").offset
                for j in range(p):
                    put(r, off + j, float(panel.covariates[i, t, j]))
            if layout.has("time_trend"):
                put(r, layout.block("time_trend").offset, (t + 1) - t_center)
            if layout.has("spatial_structured"):
                put(r, layout.block("spatial_structured").offset + i, 1.0)
            if layout.has("spatial_iid"):
                put(r, layout.block("spatial_iid").offset + i, 1.0)
            if layout.has("temporal_rw1"):
                put(r, layout.block("temporal_rw1").offset + t, 1.0)
            if layout.has("temporal_iid"):
                put(r, layout.block("temporal_iid").offset + t, 1.0)
            if layout.has("interaction"):
                put(r, layout.block("interaction").offset + i * T + t, 1.0)

    design_full = sp.csr_matrix(
        (vals, (rows, cols)), shape=(n * T, layout.total))
    offset_full = np.log(expected).ravel()
    obs_cells = np.flatnonzero(panel.observed.ravel())
    return ObservationMap(
        design=design_full[obs_cells].tocsr(),
        offset=offset_full[obs_cells],
        y=panel.counts.ravel()[obs_cells],
        obs_cells=obs_cells,
        design_full=design_full,
        offset_full=offset_full,
        expected=expected,
    )


@dataclass(frozen=True)
class PriorBlock:
    """One block of the joint prior: structure, scale handle, rank bookkeeping."""

    name: str
    slice: slice
    structure: sp.csc_matrix
    tau_name: Optional[str]  # None = fixed-effect block scaled by kappa0
    eff_rank: int  # block length minus block-local constraints
    logpdet_const: float  # log pseudo-determinant of the structure


@dataclass(frozen=True)
class ConstrainedPrecision:
    """Joint prior precision Q(theta) with linear constraints C x = 0.

    ``glogdet`` is the generalized log-determinant of the constrained
    prior, sum over blocks of eff_rank * log(scale) + log pdet(structure);
    ``block_glogdets`` exposes the per-block contributions.
    """

    Q: sp.csc_matrix
    constraints: Optional[np.ndarray]
    glogdet: float
    block_glogdets: dict
    blocks: tuple[PriorBlock, ...]

    @property
    def n_constraints(self) -> int:
        return 0 if self.constraints is None else self.constraints.shape[0]

    def regularized(self) -> sp.csc_matrix:
        """Q + C^T C, positive definite on the whole space."""
        if self.constraints is None:
            return self.Q
        c = sp.csc_matrix(self.constraints)
        return (self.Q + c.T @ c).tocsc()


def _log_pseudo_det(structure: StructureMatrix) -> float:
    """Sum of log nonzero eigenvalues (dense; structures are desk-scale)."""
    if structure.rank_deficiency == 0 and structure.entries.nnz == structure.dimension:
        diag = structure.entries.diagonal()
        if structure.entries.nnz == np.count_nonzero(diag):
            return float(np.sum(np.log(diag)))
    eigs = np.linalg.eigvalsh(structure.entries.toarray())
    return float(np.sum(np.log(eigs[structure.rank_deficiency:])))


def _prior_template(spec: ModelSpec, graph: AdjacencyGraph, T: int,
                    layout: LatentLayout):
    """Blocks, constraint matrix, and cached constants shared across theta."""
    n = graph.n_areas
    m = layout.total
    blocks: list[PriorBlock] = []
    constraint_rows: list[np.ndarray] = []

    def indicator(sl: slice, local_idx=None) -> np.ndarray:
        row = np.zeros(m)
        if local_idx is None:
            row[sl] = 1.0
        else:
            row[np.arange(sl.start, sl.stop)[local_idx]] = 1.0
        return row

    fixed_len = sum(layout.block(b).length for b in FIXED_BLOCKS if layout.has(b))
    blocks.append(PriorBlock(
        name="fixed",
        slice=slice(0, fixed_len),
        structure=sp.identity(fixed_len, format="csc"),
        tau_name=None,
        eff_rank=fixed_len,
        logpdet_const=0.0,
    ))

    if layout.has("spatial_structured"):
        sl = layout.slice_of("spatial_structured")
        comps = connected_components(graph)
        for comp in comps:
            constraint_rows.append(indicator(sl, list(comp)))
        structure = icar_structure(graph)
        blocks.append(PriorBlock(
            name="spatial_structured", slice=sl, structure=structure.entries,
            tau_name="spatial_structured", eff_rank=n - len(comps),
            logpdet_const=_log_pseudo_det(structure) if n > len(comps) else 0.0,
        ))
    if layout.has("spatial_iid"):
        sl = layout.slice_of("spatial_iid")
        constraint_rows.append(indicator(sl))
        blocks.append(PriorBlock(
            name="spatial_iid", slice=sl,
            structure=sp.identity(n, format="csc"),
            tau_name="spatial_iid", eff_rank=n - 1, logpdet_const=0.0,
        ))
    if layout.has("temporal_rw1"):
        sl = layout.slice_of("temporal_rw1")
        constraint_rows.append(indicator(sl))
        structure = rw1_structure(T)
        blocks.append(PriorBlock(
            name="temporal_rw1", slice=sl, structure=structure.entries,
            tau_name="temporal_rw1", eff_rank=T - 1,
            logpdet_const=_log_pseudo_det(structure),
        ))
    if layout.has("temporal_iid"):
        sl = layout.slice_of("temporal_iid")
        constraint_rows.append(indicator(sl))
        blocks.append(PriorBlock(
            name="temporal_iid", slice=sl,
            structure=sp.identity(T, format="csc"),
            tau_name="temporal_iid", eff_rank=T - 1, logpdet_const=0.0,
        ))
    if layout.has("interaction"):
        sl = layout.slice_of("interaction")
        # zero margins: one row per area, plus one per year except the last
        # (the full set of n + T margin sums has rank n + T - 1)
        for i in range(n):
            constraint_rows.append(indicator(sl, list(range(i * T, (i + 1) * T))))
        for t in range(T - 1):
            constraint_rows.append(indicator(sl, list(range(t, n * T, T))))
        k_delta = n + T - 1
        blocks.append(PriorBlock(
            name="interaction", slice=sl,
            structure=sp.identity(n * T, format="csc"),
            tau_name="interaction", eff_rank=n * T - k_delta,
            logpdet_const=0.0,
        ))

    constraints = np.vstack(constraint_rows) if constraint_rows else None
    return tuple(blocks), constraints


def _assemble_precision(blocks: tuple[PriorBlock, ...],
                        constraints: Optional[np.ndarray],
                        theta: dict, kappa0: float) -> ConstrainedPrecision:
    pieces = []
    glogdet = 0.0
    per_block = {}
    for b in blocks:
        if b.tau_name is None:
            scale = kappa0
        else:
            tau = float(theta[b.tau_name])
            if not tau > 0.0:
                raise ValidationError(
                    f"precision for {b.tau_name} must be positive, got {tau}")
            scale = tau
        pieces.append(b.structure * scale)
        contrib = b.eff_rank * math.log(scale) + b.logpdet_const
        glogdet += contrib
        per_block[b.name] = contrib
    Q = sp.block_diag(pieces, format="csc")
    return ConstrainedPrecision(Q=Q, constraints=constraints, glogdet=glogdet,
                                block_glogdets=per_block, blocks=blocks)


def prior_precision(spec: ModelSpec, theta: dict, graph: AdjacencyGraph,
                    T: int) -> ConstrainedPrecision:
    """Joint prior precision at hyperparameters ``theta``.

    Fixed effects get the vague precision kappa0; each random block is its
    structure matrix scaled by its precision.  Constraints: sum-to-zero on
    the structured spatial block per connected component, on the random
    walk, on both iid main effects, and zero row/column margins on the
    interaction (one redundant margin dropped).
    """
    layout = build_layout(spec, graph.n_areas, T, len(spec.covariates))
    blocks, constraints = _prior_template(spec, graph, T, layout)
    return _assemble_precision(blocks, constraints, theta,
                               spec.fixed_effect_precision)


class PoissonLikelihood:
    """Poisson log-likelihood with log link; eta = log(lambda)."""

    name = "poisson"

    def pointwise(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return y * eta - np.exp(eta) - gammaln(y + 1.0)

    def loglik(self, eta: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.pointwise(eta, y)))

    def gradient(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return y - np.exp(eta)

    def curvature(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.exp(np.clip(eta, -700.0, 700.0))


class GaussianLikelihood:
    """Gaussian replacement likelihood (test hook): y ~ N(eta, sd^2)."""

    name = "gaussian"

    def __init__(self, sd: float = 1.0):
        if not sd > 0:
            raise ValidationError("gaussian sd must be positive")
        self.sd = float(sd)

    def pointwise(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        var = self.sd ** 2
        return -0.5 * ((y - eta) ** 2 / var + math.log(2.0 * math.pi * var))

    def loglik(self, eta: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.pointwise(eta, y)))

    def gradient(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (y - eta) / self.sd ** 2

    def curvature(self, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.full_like(eta, 1.0 / self.sd ** 2)


@dataclass
class LatentModel:
    """Fully assembled model: data, observation map, and prior machinery."""

    spec: ModelSpec
    panel: PanelData
    layout: LatentLayout
    obs_map: ObservationMap
    scaling: Optional[CovariateScaling]
    likelihood: object
    _blocks: tuple[PriorBlock, ...]
    _constraints: Optional[np.ndarray]

    def prior(self, theta: dict) -> ConstrainedPrecision:
        return _assemble_precision(self._blocks, self._constraints, theta,
                                   self.spec.fixed_effect_precision)

    @property
    def constraints(self) -> Optional[np.ndarray]:
        return self._constraints

    @property
    def hyper_names(self) -> tuple[str, ...]:
        return self.spec.active_hyperparameters()

    @property
    def n_latent(self) -> int:
        return self.layout.total

    def coordinate_names(self) -> list[str]:
        names: list[str] = []
        areas = self.panel.graph.areas
        years = self.panel.years
        for b in self.layout.blocks:
            if b.name == "intercept":
                names.append("intercept")
            elif b.name == "covariates":
                names.extend(self.spec.covariates)
            elif b.name == "time_trend":
                names.append("time_trend")
            elif b.name in ("spatial_structured", "spatial_iid"):
                names.extend(f"{b.name}[{a}]" for a in areas)
            elif b.name in ("temporal_rw1", "temporal_iid"):
                names.extend(f"{b.name}[{y}]" for y in years)
            else:
                names.extend(f"interaction[{a}:{y}]" for a in areas for y in years)
        return names

    def fixed_effect_names(self) -> list[str]:
        out = ["intercept"]
        out.extend(self.spec.covariates)
        if self.layout.has("time_trend"):
            out.append("time_trend")
        return out


def build_model(spec: ModelSpec, panel: PanelData) -> LatentModel:
    """Assemble the latent Gaussian model from a spec and a panel."""
    if len(panel.covariate_names) and spec.covariates:
        missing = [c for c in spec.covariates if c not in panel.covariate_names]
        if missing:
            raise ValidationError(f"panel lacks covariates {missing}")
        keep = [panel.covariate_names.index(c) for c in spec.covariates]
        panel = replace(panel,
                        covariates=panel.covariates[:, :, keep],
                        covariate_names=tuple(spec.covariates))
    elif spec.covariates:
        raise ValidationError(f"panel lacks covariates {list(spec.covariates)}")
    else:
        panel = replace(panel, covariates=panel.covariates[:, :, :0],
                        covariate_names=())

    expected = expected_counts(panel, spec.expected_policy)
    scaling = None
    if spec.standardize_covariates and spec.covariates:
        panel, scaling = standardize_covariates(panel)
    layout = build_layout(spec, panel.n_areas, panel.n_years,
                          len(spec.covariates))
    obs_map = assemble_design(panel, layout, expected)
    blocks, constraints = _prior_template(spec, panel.graph, panel.n_years,
                                          layout)
    likelihood = (GaussianLikelihood(spec.gaussian_sd)
                  if spec.likelihood == "gaussian" else PoissonLikelihood())
    return LatentModel(spec=spec, panel=panel, layout=layout, obs_map=obs_map,
                       scaling=scaling, likelihood=likelihood,
                       _blocks=blocks, _constraints=constraints)


def simulate(spec: ModelSpec, theta_true: dict, beta_true: Sequence[float],
             graph: AdjacencyGraph, years: Sequence[int], expected,
             seed, alpha_true: float = 0.0,
             covariate_values: Optional[np.ndarray] = None,
             latent_overrides: Optional[dict] = None,
             time_trend_true: float = 0.0) -> tuple[PanelData, dict]:
    """Draw a synthetic panel from the generative model.

    Random-effect blocks come from their constrained Gaussian priors at
    ``theta_true``; fixed effects are set to the supplied truths.
    Covariate values default to standard normal draws.  Returns the panel
    plus a truth record with every latent block for scoring.
    """
    n, T = graph.n_areas, len(years)
    p = len(spec.covariates)
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_true.shape != (p,):
        raise ValidationError(
            f"beta_true has shape {beta_true.shape}, expected ({p},)")
    layout = build_layout(spec, n, T, p)
    expected = np.broadcast_to(np.asarray(expected, dtype=float), (n, T)).copy()
    if np.any(expected <= 0):
        raise ValidationError("expected counts must be positive")

    seeds = np.random.SeedSequence(seed).spawn(8)
    rng = np.random.default_rng(seeds[0])
    if covariate_values is None:
        covariate_values = rng.standard_normal((n, T, p))
    else:
        covariate_values = np.asarray(covariate_values, dtype=float)
        if covariate_values.shape != (n, T, p):
            raise ValidationError("covariate_values shape mismatch")

    blocks, constraints = _prior_template(spec, graph, T, layout)
    latent_overrides = dict(latent_overrides or {})
    truth: dict = {"alpha": float(alpha_true), "beta": beta_true.copy(),
                   "theta": dict(theta_true)}
    if layout.has("time_trend"):
        truth["time_trend"] = float(time_trend_true)

    m = layout.total
    x = np.zeros(m)
    x[layout.block("intercept").offset] = alpha_true
    if p > 0:
        x[layout.slice_of("covariates")] = beta_true
    if layout.has("time_trend"):
        x[layout.block("time_trend").offset] = time_trend_true

    block_seed = iter(seeds[1:7])
    for b in blocks:
        if b.tau_name is None:
            continue
        if b.name in latent_overrides:
            values = np.asarray(latent_overrides[b.name], dtype=float)
            if values.shape != (b.slice.stop - b.slice.start,):
                raise ValidationError(f"override for {b.name} has wrong length")
        else:
            tau = float(theta_true[b.tau_name])
            if not tau > 0:
                raise ValidationError(f"precision for {b.tau_name} must be positive")
            q_b = (b.structure * tau).tocsc()
            c_b = None
            if constraints is not None:
                rows = constraints[:, b.slice]
                keep = np.abs(rows).sum(axis=1) > 0
                if keep.any():
                    c_b = constraints[keep][:, b.slice]
                    q_b = (q_b + sp.csc_matrix(c_b).T @ sp.csc_matrix(c_b)).tocsc()
            factor = gmrf.factorize(q_b)
            values = gmrf.sample_constrained(
                factor, np.zeros(q_b.shape[0]), c_b, 1, next(block_seed))[0]
        x[b.slice] = values
        truth[b.name] = values.copy()

    # scratch panel carrying the covariates so the design can be assembled
    scratch = PanelData(
        graph=graph, years=tuple(years),
        counts=np.zeros((n, T)), observed=np.ones((n, T), dtype=bool),
        exposure=expected.copy(), covariates=covariate_values,
        covariate_names=tuple(spec.covariates), expected=expected.copy(),
    )
    obs_map = assemble_design(scratch, layout, expected)
    eta = np.asarray(obs_map.design_full @ x)
    if np.max(eta) > SIMULATION_ETA_CAP:
        raise ValidationError(
            f"simulated linear predictor {np.max(eta):.2f} exceeds "
            f"{SIMULATION_ETA_CAP}; inputs look mis-scaled")
    lam = expected.ravel() * np.exp(eta)
    y = np.random.default_rng(seeds[7]).poisson(lam).astype(float)
    truth["eta"] = eta.reshape(n, T)
    truth["lambda"] = lam.reshape(n, T)
    truth["latent"] = x

    panel = replace(scratch, counts=y.reshape(n, T))
    return panel, truth
