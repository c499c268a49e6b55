"""
Benchmark matrix generators.

Stencils are h^2-scaled: unit off-diagonal couplings, with sigma and R
entering as ``sigma h^2`` and ``R h / 2``. Unknowns are numbered with x
fastest.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .matrix import BlockSparseMatrix, Symmetry

logger = logging.getLogger(__name__)

BOUNDARIES = ("dirichlet", "periodic")
COEFF_CASES = ("constant", "unif01", "inverse-unif01", "unif-neg1-1")
COEFF_FLOOR = 1e-6


@dataclass(frozen=True)
class GridSpec:
    dims: tuple[int, ...]
    bc: str = "dirichlet"

    def __post_init__(self) -> None:
        if len(self.dims) not in (2, 3):
            raise ConfigError(f"grids are 2D or 3D, got {len(self.dims)} dimensions")
        if any(d < 2 for d in self.dims):
            raise ConfigError(f"every grid dimension must be at least 2, got {self.dims}")
        if self.bc not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.bc!r}")

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @property
    def h(self) -> float:
        return 1.0 / (self.dims[0] + 1)


@dataclass(frozen=True)
class CoeffField:
    """Cell coefficient field; cases 1-3 are unif01, inverse-unif01, unif-neg1-1."""

    case: str = "constant"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.case not in COEFF_CASES:
            raise ConfigError(f"coefficient case must be one of {COEFF_CASES}, got {self.case!r}")

    def sample(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.case == "constant":
            return np.ones(n)
        if self.case == "unif01":
            return rng.uniform(0.0, 1.0, n)
        if self.case == "unif-neg1-1":
            return rng.uniform(-1.0, 1.0, n)
        rho = rng.uniform(0.0, 1.0, n)
        while np.any(small := rho < COEFF_FLOOR):
            rho[small] = rng.uniform(0.0, 1.0, int(small.sum()))
        return 1.0 / rho


def _neighbors(spec: GridSpec, axis: int, shift: int) -> tuple[np.ndarray, np.ndarray]:
    """(index, neighbor index) pairs along one axis direction."""
    idx = np.arange(spec.n)
    coords = list(np.unravel_index(idx, spec.dims, order="F"))
    moved = coords[axis] + shift
    if spec.bc == "periodic":
        moved %= spec.dims[axis]
        keep = np.ones(spec.n, dtype=bool)
    else:
        keep = (moved >= 0) & (moved < spec.dims[axis])
    coords[axis] = moved
    coords = [c[keep] for c in coords]
    return idx[keep], np.ravel_multi_index(tuple(coords), spec.dims, order="F")


Coupling = Callable[[int, np.ndarray, np.ndarray], np.ndarray]


def _stencil(spec: GridSpec, diagonal: np.ndarray, coupling: Coupling) -> sp.coo_matrix:
    rows, cols, vals = [np.arange(spec.n)], [np.arange(spec.n)], [diagonal]
    for axis in range(len(spec.dims)):
        for shift in (-1, 1):
            i, j = _neighbors(spec, axis, shift)
            rows.append(i)
            cols.append(j)
            vals.append(coupling(shift, i, j))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(spec.n, spec.n),
    )


def poisson(spec: GridSpec) -> BlockSparseMatrix:
    """5-point (2D) or 7-point (3D) Laplacian, diagonal 2d and couplings -1."""
    diag = np.full(spec.n, 2.0 * len(spec.dims))
    coo = _stencil(spec, diag, lambda shift, i, j: -np.ones(i.size))
    return BlockSparseMatrix.from_scipy(coo, Symmetry.SYMMETRIC)


def variable_coeff_poisson(
    spec: GridSpec, field: CoeffField, anchor: bool = False
) -> BlockSparseMatrix:
    """Flux-form ``div(phi grad T)`` with face coefficients averaged arithmetically.

    Args:
        spec: Periodic grid
        field: Cell coefficients
        anchor: Reduce row and column 0 to the diagonal entry, removing the
            constant null space of the periodic operator

    Returns:
        Symmetric matrix (indefinite for the unif-neg1-1 case)
    """
    if spec.bc != "periodic":
        raise ConfigError("variable-coefficient Poisson uses periodic boundaries")
    phi = field.sample(spec.n)
    diag = np.zeros(spec.n)
    for axis in range(len(spec.dims)):
        for shift in (-1, 1):
            i, j = _neighbors(spec, axis, shift)
            np.add.at(diag, i, 0.5 * (phi[i] + phi[j]))
    coo = _stencil(spec, diag, lambda shift, i, j: -0.5 * (phi[i] + phi[j]))
    if anchor:
        off = (coo.row == 0) ^ (coo.col == 0)
        coo = sp.coo_matrix((coo.data[~off], (coo.row[~off], coo.col[~off])), shape=coo.shape)
    return BlockSparseMatrix.from_scipy(coo, Symmetry.SYMMETRIC)


def advection_diffusion(spec: GridSpec, sigma: float, r: float) -> BlockSparseMatrix:
    """``sigma T + R grad T - lap T`` with central differences, Dirichlet boundaries."""
    if spec.bc != "dirichlet":
        raise ConfigError("advection-diffusion uses Dirichlet boundaries")
    h = spec.h
    diag = np.full(spec.n, sigma * h * h + 2.0 * len(spec.dims))
    half = r * h / 2.0
    coo = _stencil(spec, diag, lambda shift, i, j: np.full(i.size, -1.0 + shift * half))
    symmetry = Symmetry.SYMMETRIC if r == 0 else Symmetry.GENERAL
    return BlockSparseMatrix.from_scipy(coo, symmetry)


def manufactured_rhs(
    m: BlockSparseMatrix, seed: int = 0, x_star: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(b, x*) with ``b = A x*`` and x* standard normal unless given."""
    if x_star is None:
        x_star = np.random.default_rng(seed).standard_normal(m.n)
    return m.matvec(x_star), np.asarray(x_star, dtype=np.float64)


def random_dominant(n: int, density: float = 0.01, seed: int = 0) -> BlockSparseMatrix:
    """Random sparse pattern with a strictly dominant diagonal."""
    rng = np.random.default_rng(seed)
    off = sp.random(
        n, n, density=density, random_state=rng, format="csr",
        data_rvs=lambda k: rng.uniform(-1.0, 1.0, k),
    )
    off.setdiag(0)
    off.eliminate_zeros()
    dominance = np.asarray(abs(off).sum(axis=1)).ravel() + 1.0
    return BlockSparseMatrix.from_scipy(off + sp.diags(dominance))


def ring(n: int) -> BlockSparseMatrix:
    """Periodic 1D chain with diagonal 3 and couplings -1."""
    i = np.arange(n)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([i, (i + 1) % n, (i - 1) % n])
    vals = np.concatenate([np.full(n, 3.0), -np.ones(n), -np.ones(n)])
    return BlockSparseMatrix(n, rows, cols, vals, Symmetry.SYMMETRIC)


def identity(n: int) -> BlockSparseMatrix:
    i = np.arange(n)
    return BlockSparseMatrix(n, i, i, np.ones(n), Symmetry.SYMMETRIC)


# ========== name:params grammar ==========


def parse_generator(text: str) -> tuple[str, list[int], dict[str, str]]:
    """Split ``name:1,2,key=value`` into (name, ints, options)."""
    name, _, params = text.partition(":")
    ints: list[int] = []
    options: dict[str, str] = {}
    for token in filter(None, (p.strip() for p in params.split(","))):
        if "=" in token:
            key, value = token.split("=", 1)
            options[key.strip()] = value.strip()
        else:
            try:
                ints.append(int(token))
            except ValueError:
                raise ConfigError(f"bad size {token!r} in generator {text!r}")
    return name.strip(), ints, options


def _grid(ints: list[int], ndim: int, bc: str) -> GridSpec:
    if len(ints) == 1:
        ints = ints * ndim
    if len(ints) != ndim:
        raise ConfigError(f"expected {ndim} grid sizes, got {ints}")
    return GridSpec(tuple(ints), bc)


def _single(ints: list[int], name: str) -> int:
    if len(ints) != 1 or ints[0] < 1:
        raise ConfigError(f"{name} takes one positive size, got {ints}")
    return ints[0]


_CASE_ALIASES = {"0": "constant", "1": "unif01", "2": "inverse-unif01", "3": "unif-neg1-1"}


def _vcp(ints: list[int], opts: dict[str, str]) -> BlockSparseMatrix:
    ndim = int(opts.get("dim", 3))
    case = _CASE_ALIASES.get(opts.get("case", "1"), opts.get("case", "1"))
    anchor = opts.get("anchor", "1") not in ("0", "false", "no")
    field = CoeffField(case, int(opts.get("seed", 0)))
    return variable_coeff_poisson(_grid(ints, ndim, "periodic"), field, anchor=anchor)


GENERATORS: dict[str, Callable[[list[int], dict[str, str]], BlockSparseMatrix]] = {
    "poisson2d": lambda ints, o: poisson(_grid(ints, 2, o.get("bc", "dirichlet"))),
    "poisson3d": lambda ints, o: poisson(_grid(ints, 3, o.get("bc", "dirichlet"))),
    "vcp": _vcp,
    "advdiff": lambda ints, o: advection_diffusion(
        _grid(ints, 3, "dirichlet"), float(o.get("sigma", 1.0)), float(o.get("R", 1.0))
    ),
    "random": lambda ints, o: random_dominant(
        _single(ints, "random"), float(o.get("density", 0.01)), int(o.get("seed", 0))
    ),
    "ring": lambda ints, o: ring(_single(ints, "ring")),
    "identity": lambda ints, o: identity(_single(ints, "identity")),
}


def generate(text: str) -> BlockSparseMatrix:
    """Build a matrix from ``name:params``, e.g. ``poisson3d:16,16,16`` or ``vcp:16,case=2``."""
    name, ints, options = parse_generator(text)
    builder = GENERATORS.get(name)
    if builder is None:
        raise ConfigError(f"unknown generator {name!r}, expected one of {sorted(GENERATORS)}")
    try:
        m = builder(ints, options)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad parameters for {text!r}: {e}") from e
    logger.debug(f"Generated {text}: n={m.n}, nnz={m.nnz}")
    return m
