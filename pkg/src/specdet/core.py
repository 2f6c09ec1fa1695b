"""Parameter records, lattice/momentum grids, random streams, and config I/O.

Everything here is an immutable value object: safe to share between worker
processes and hashable so downstream caches can key on it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


class SaddlePhase(str, enum.Enum):
    SIMPLE = "simple"    # y = 0 at the saddle
    COMPLEX = "complex"  # y > 0 at the saddle


class FlowPhase(str, enum.Enum):
    CONFINED = "confined"  # E < E*: bounded droplet, zero current
    CURRENT = "current"    # E > E*: particles flow, finite current


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the discrete random block operator.

    The operator acts on N-component fields over a hypercubic lattice of
    linear size L in dimension d (M = L**d sites).  t is the elastic
    coefficient, J the disorder strength, c the trace-noise coefficient,
    mu the curvature/mass and E the spectral parameter.  Only mu - E enters
    any spectral quantity.
    """

    d: int
    N: int
    L: int
    t: float = 1.0
    J: float = 1.0
    c: float = 1.0
    mu: float = 1.0
    E: float = 0.0
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.d < 0:
            raise ConfigError(f"d must be >= 0, got {self.d}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if not self.t > 0:
            raise ConfigError(f"t must be > 0, got {self.t}")
        if not self.J > 0:
            raise ConfigError(f"J must be > 0, got {self.J}")
        if self.c < 0:
            raise ConfigError(f"c must be >= 0, got {self.c}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def M(self) -> int:
        """Number of lattice sites."""
        return 1 if self.d == 0 else self.L ** self.d

    @property
    def mu_eff(self) -> float:
        """The only combination of (mu, E) that enters spectral quantities."""
        return self.mu - self.E

    def grid(self) -> "MomentumGrid":
        return MomentumGrid(self.d, self.L, self.boundary)


def canonicalize(params: ModelParams) -> ModelParams:
    """Map (mu, E) -> (mu - E, 0).  All analytic operations are invariant."""
    return replace(params, mu=params.mu - params.E, E=0.0)


@dataclass(frozen=True)
class ContinuumParams:
    """Parameters of the d=1 continuum operator on a line of given length."""

    tilde_t: float = 1.0
    tilde_j: float = 1.0
    c: float = 1.0
    mu: float = 1.0
    E: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        if not self.tilde_t > 0:
            raise ConfigError("tilde_t must be > 0")
        if not self.tilde_j > 0:
            raise ConfigError("tilde_j must be > 0")
        if not self.length > 0:
            raise ConfigError("length must be > 0")


@dataclass(frozen=True)
class MomentumGrid:
    """Momentum grid of the lattice Laplacian on a hypercube.

    For d=0 the grid degenerates to the single value Delta = 0.
    """

    d: int
    L: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def M(self) -> int:
        return 1 if self.d == 0 else self.L ** self.d


def _laplacian_eigenvalues_1d(L: int, boundary: Boundary) -> np.ndarray:
    if boundary is Boundary.PERIODIC:
        k = 2.0 * np.pi * np.arange(L) / L
        return 2.0 * (np.cos(k) - 1.0)
    k = np.pi * np.arange(1, L + 1) / (L + 1)
    return 2.0 * (np.cos(k) - 1.0)


def laplacian_eigenvalues(grid: MomentumGrid) -> np.ndarray:
    """All L**d eigenvalues Delta(k) of the lattice Laplacian (<= 0)."""
    if grid.d == 0:
        return np.zeros(1)
    eigs1 = _laplacian_eigenvalues_1d(grid.L, grid.boundary)
    out = eigs1
    for _ in range(grid.d - 1):
        out = np.add.outer(out, eigs1).ravel()
    return out


def laplacian_matrix(grid: MomentumGrid) -> np.ndarray:
    """Dense M x M matrix of the lattice Laplacian Delta (<= 0 spectrum).

    For L=2 periodic the two bonds between the sites add up, giving
    off-diagonal entries of 2.
    """
    if grid.d == 0:
        return np.zeros((1, 1))
    L = grid.L
    one = np.zeros((L, L))
    for x in range(L):
        one[x, x] = -2.0
        if x + 1 < L:
            one[x, x + 1] += 1.0
            one[x + 1, x] += 1.0
    if grid.boundary is Boundary.PERIODIC and L > 1:
        one[L - 1, 0] += 1.0
        one[0, L - 1] += 1.0
    if grid.boundary is Boundary.PERIODIC and L == 1:
        one[0, 0] = 0.0
    if grid.d == 1:
        return one
    eye = np.eye(L)
    terms = []
    for axis in range(grid.d):
        term = np.array([[1.0]])
        for j in range(grid.d):
            term = np.kron(term, one if j == axis else eye)
        terms.append(term)
    return sum(terms)


def kinetic_eigenvalues(params: ModelParams) -> np.ndarray:
    """Eigenvalues of -t*Delta on the model's grid (all >= 0)."""
    return -params.t * laplacian_eigenvalues(params.grid())


@dataclass(frozen=True)
class RandomStream:
    """Counter-based reproducible Gaussian stream.

    Each (seed, stream) pair keys an independent Philox generator, so a
    realization is bit-reproducible no matter how work is distributed over
    workers.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed % 2 ** 64, self.stream % 2 ** 64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RandomStream":
        """Derived stream: used to hand one stream per work item."""
        return RandomStream(self.seed, self.stream * 1_000_003 + 1 + index)

    def scalar_seed(self) -> int:
        """A 32-bit seed for kernels that keep their own generator state."""
        return int(np.random.SeedSequence([self.seed % 2 ** 63, self.stream % 2 ** 63])
                   .generate_state(1, np.uint32)[0])


# ---------------------------------------------------------------------------
# Flat key = value config format ('#' comments, optional [section] headers).

_PARAM_KEYS = {"d", "n", "l", "t", "j", "c", "mu", "e", "boundary", "seed"}


def parse_config_text(text: str) -> dict:
    """Parse the flat config format into {section_name: {key: value}}.

    Keys before any [section] header land in section ''.  Values stay
    strings; callers coerce.
    """
    sections: dict = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        sections[current][key.strip().lower()] = value.strip()
    return sections


def params_from_config(mapping: dict, strict: bool = True) -> tuple[ModelParams, int]:
    """Build ModelParams (+ seed) from a flat key->string mapping."""
    unknown = set(mapping) - _PARAM_KEYS
    if strict and unknown:
        raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")

    def get(key, cast, default):
        if key in mapping:
            try:
                return cast(mapping[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {mapping[key]!r}") from exc
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default

    params = ModelParams(
        d=get("d", int, None),
        N=get("n", int, None),
        L=get("l", int, 1),
        t=get("t", float, 1.0),
        J=get("j", float, 1.0),
        c=get("c", float, 1.0),
        mu=get("mu", float, 1.0),
        E=get("e", float, 0.0),
        boundary=Boundary(get("boundary", str, "periodic").lower()),
    )
    seed = get("seed", int, 0)
    return params, seed


def params_to_config(params: ModelParams, seed: int = 0) -> str:
    lines = [
        f"d = {params.d}",
        f"n = {params.N}",
        f"l = {params.L}",
        f"t = {params.t!r}",
        f"j = {params.J!r}",
        f"c = {params.c!r}",
        f"mu = {params.mu!r}",
        f"e = {params.E!r}",
        f"boundary = {params.boundary.value}",
        f"seed = {seed}",
    ]
    return "\n".join(lines) + "\n"


def load_params(path) -> tuple[ModelParams, int]:
    with open(path) as fh:
        sections = parse_config_text(fh.read())
    mapping = dict(sections.get("", {}))
    mapping.update(sections.get("model", {}))
    return params_from_config(mapping)
