"""Heterogeneous diffusion problems ``-div(mu grad u) = f`` on (-1, 1)^3.

Continuous tensor-product Lagrange elements of degree p on a uniform
hexahedral grid, homogeneous Dirichlet data eliminated, piecewise-constant
``mu = 10**eps`` laid out as slices (mode 1), lines (mode 2) or a
checkerboard (mode 3).
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .sparse import CooMatrix, CsrMatrix, build, read_matrix_market, reorder, write_matrix_market

__all__ = [
    "DiffusionSpec",
    "GridSpec",
    "ProblemInstance",
    "SuiteConfig",
    "InfeasibleConfigError",
    "mu_eval",
    "assemble_diffusion",
    "dof_coordinates",
    "generate_suite",
    "write_suite",
    "read_suite",
    "poisson_problem",
]


class InfeasibleConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    mode: int
    size: int
    eps: NDArray[np.float64]
    eps_max: float

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=np.float64)
        object.__setattr__(self, "eps", eps)
        if self.mode not in (1, 2, 3):
            raise ValueError(f"mode must be 1, 2 or 3, got {self.mode}")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if eps.shape != (self.size ** self.mode,):
            raise ValueError(f"eps must have {self.size ** self.mode} entries, got {eps.shape}")
        if np.any(eps < 0) or np.any(eps > self.eps_max):
            raise ValueError("eps entries must lie in [0, eps_max]")

    @classmethod
    def uniform(cls) -> "DiffusionSpec":
        """mu == 1 everywhere."""
        return cls(1, 1, np.zeros(1), 0.0)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "size": self.size, "eps": self.eps.tolist(),
                "eps_max": self.eps_max}

    @classmethod
    def from_dict(cls, d) -> "DiffusionSpec":
        return cls(int(d["mode"]), int(d["size"]), np.asarray(d["eps"]), float(d["eps_max"]))


@dataclass(frozen=True)
class GridSpec:
    cells_per_dim: int
    p: int = 1

    def __post_init__(self):
        if self.cells_per_dim < 1:
            raise ValueError("cells_per_dim must be >= 1")
        if self.p not in (1, 2, 3):
            raise ValueError(f"p must be 1, 2 or 3, got {self.p}")

    @property
    def nodes_per_dim(self) -> int:
        return self.p * self.cells_per_dim + 1

    @property
    def interior_per_dim(self) -> int:
        return self.p * self.cells_per_dim - 1

    @property
    def n_dofs(self) -> int:
        return max(self.interior_per_dim, 0) ** 3

    @property
    def h(self) -> float:
        return 2.0 / self.cells_per_dim


@dataclass(eq=False)
class ProblemInstance:
    A: CsrMatrix
    f: NDArray[np.float64]
    diffusion: DiffusionSpec
    grid: GridSpec
    renumbering: str = "natural"
    seed: int = 0
    base_problem_id: str = "b0"
    perm: NDArray[np.int64] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def problem_id(self) -> str:
        return f"{self.base_problem_id}-{self.renumbering}"

    @property
    def p(self) -> int:
        return self.grid.p

    @property
    def n(self) -> int:
        return self.A.n_rows

    def manifest_entry(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "base_problem_id": self.base_problem_id,
            "renumbering": self.renumbering,
            "seed": self.seed,
            "grid": asdict(self.grid),
            "diffusion": self.diffusion.to_dict(),
            "n": self.n,
            "nnz": self.A.nnz,
            **self.meta,
        }


def mu_eval(x, spec: DiffusionSpec):
    """Diffusion coefficient at points ``x`` (shape ``(..., 3)``).

    The pattern cell along axis ``i`` is ``floor((x_i + 1) * size / 2)``,
    clamped to ``size - 1`` on the right boundary; axes ``1..mode`` are
    combined with strides ``size**(i-1)``.
    """
    x = np.asarray(x, dtype=np.float64)
    j = np.zeros(x.shape[:-1], dtype=np.int64)
    for i in range(spec.mode):
        cell = np.floor((x[..., i] + 1.0) * spec.size / 2.0).astype(np.int64)
        cell = np.clip(cell, 0, spec.size - 1)
        j += cell * spec.size ** i
    return 10.0 ** spec.eps[j]


def _lagrange_1d(p: int, xi):
    """Values and derivatives of the equispaced degree-p Lagrange basis on
    [0, 1] at points ``xi``; arrays of shape (p+1, len(xi))."""
    nodes = np.linspace(0.0, 1.0, p + 1)
    xi = np.asarray(xi, dtype=np.float64)
    val = np.ones((p + 1, len(xi)))
    der = np.zeros((p + 1, len(xi)))
    for a in range(p + 1):
        others = [b for b in range(p + 1) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        for b in others:
            val[a] *= xi - nodes[b]
        for skip in others:
            term = np.ones(len(xi))
            for b in others:
                if b != skip:
                    term *= xi - nodes[b]
            der[a] += term
        val[a] /= denom
        der[a] /= denom
    return val, der


def _reference_tables(p: int):
    gx, gw = np.polynomial.legendre.leggauss(p + 1)
    xi = 0.5 * (gx + 1.0)
    w1 = 0.5 * gw
    phi, dphi = _lagrange_1d(p, xi)
    nq1, nb1 = len(xi), p + 1
    # local basis index a + nb1*b + nb1^2*c, quadrature index qx + nq1*qy + nq1^2*qz
    qi = np.arange(nq1)
    QX, QY, QZ = np.meshgrid(qi, qi, qi, indexing="ij")
    QX, QY, QZ = (Q.transpose(2, 1, 0).ravel() for Q in (QX, QY, QZ))
    bi = np.arange(nb1)
    BX, BY, BZ = np.meshgrid(bi, bi, bi, indexing="ij")
    BX, BY, BZ = (B.transpose(2, 1, 0).ravel() for B in (BX, BY, BZ))
    vx, vy, vz = phi[BX][:, QX], phi[BY][:, QY], phi[BZ][:, QZ]
    dx, dy, dz = dphi[BX][:, QX], dphi[BY][:, QY], dphi[BZ][:, QZ]
    values = (vx * vy * vz).T  # (nq, nb)
    grads = np.stack([dx * vy * vz, vx * dy * vz, vx * vy * dz], axis=-1).transpose(1, 0, 2)
    weights = w1[QX] * w1[QY] * w1[QZ]
    points = np.stack([xi[QX], xi[QY], xi[QZ]], axis=-1)
    local = np.stack([BX, BY, BZ], axis=-1)
    return points, weights, values, grads, local


def _cell_origins(grid: GridSpec):
    N = grid.cells_per_dim
    e = np.arange(N)
    EX, EY, EZ = np.meshgrid(e, e, e, indexing="ij")
    return np.stack([EX.transpose(2, 1, 0).ravel(), EY.transpose(2, 1, 0).ravel(),
                     EZ.transpose(2, 1, 0).ravel()], axis=-1)


def assemble_diffusion(spec: DiffusionSpec, grid: GridSpec,
                       source: Callable[[NDArray], NDArray] | None = None,
                       drop_tol: float = 1e-14) -> ProblemInstance:
    """Assemble the stiffness matrix and load vector.

    Uses (p+1)-point Gauss-Legendre quadrature per direction with ``mu``
    sampled at the quadrature points. Dirichlet nodes are removed from the
    system. Entries below ``drop_tol`` times the largest magnitude are
    quadrature roundoff (cancelled couplings) and are discarded.

    ``source`` defaults to the constant 1.
    """
    p, h = grid.p, grid.h
    n1d = grid.interior_per_dim
    if n1d < 1:
        raise InfeasibleConfigError(f"grid {grid} has no interior degrees of freedom")
    ref_pts, w, vals, grads, local = _reference_tables(p)
    cells = _cell_origins(grid)
    # physical quadrature points, (E, nq, 3)
    xq = -1.0 + h * (cells[:, None, :] + ref_pts[None, :, :])
    mu = mu_eval(xq, spec)
    G = np.einsum("q,qad,qbd->qab", w * h, grads, grads)  # h^3 * (1/h)^2
    Ke = np.einsum("eq,qab->eab", mu, G)

    gnode = p * cells[:, None, :] + local[None, :, :]  # (E, nb, 3)
    interior = np.all((gnode >= 1) & (gnode <= n1d), axis=-1)
    g = gnode - 1
    dof = np.where(interior, g[..., 0] + n1d * g[..., 1] + n1d * n1d * g[..., 2], -1)

    rows = np.broadcast_to(dof[:, :, None], Ke.shape)
    cols = np.broadcast_to(dof[:, None, :], Ke.shape)
    keep = (rows >= 0) & (cols >= 0)
    n = n1d ** 3
    A = build(CooMatrix(n, n, rows[keep], cols[keep], Ke[keep]))
    if drop_tol > 0 and A.nnz:
        tiny = np.abs(A.val) <= drop_tol * np.abs(A.val).max()
        if tiny.any():
            A = build(CooMatrix(n, n, A.row_indices()[~tiny], A.col_idx[~tiny], A.val[~tiny]))

    src = np.ones(xq.shape[:2]) if source is None else np.asarray(source(xq), dtype=np.float64)
    fe = np.einsum("eq,q,qa->ea", src, w * h ** 3, vals)
    f = np.zeros(n)
    np.add.at(f, dof[interior], fe[interior])
    return ProblemInstance(A, f, spec, grid)


def dof_coordinates(grid: GridSpec) -> NDArray[np.float64]:
    """Physical coordinates of the interior DoFs in natural order, (n, 3)."""
    n1d = grid.interior_per_dim
    t = -1.0 + grid.h / grid.p * np.arange(1, n1d + 1)
    Z, Y, X = np.meshgrid(t, t, t, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)


def poisson_problem(n_interior: int) -> ProblemInstance:
    """Q1 Laplacian with ``n_interior**3`` unknowns and unit source."""
    return assemble_diffusion(DiffusionSpec.uniform(), GridSpec(n_interior + 1, 1))


@dataclass
class SuiteConfig:
    count: int = 10
    p_values: Sequence[int] = (1,)
    modes: Sequence[int] = (1, 2, 3)
    sizes: Sequence[int] = (2, 3, 4, 5)
    cells: Sequence[int] = (4, 6, 8)
    eps_max_values: Sequence[float] = (1.0, 3.0, 10.0)
    renumberings: Sequence[str] = ("natural",)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def _renumber(inst: ProblemInstance, method: str, seed) -> ProblemInstance:
    A, perm = reorder(inst.A, method, seed=seed)
    return ProblemInstance(A, inst.f[perm].copy(), inst.diffusion, inst.grid, method,
                           inst.seed, inst.base_problem_id, perm, dict(inst.meta))


def generate_suite(config: SuiteConfig) -> list[ProblemInstance]:
    """Sample ``config.count`` base problems and emit each under every
    requested renumbering. Base problem ``b`` draws from its own stream
    ``SeedSequence([seed, b])`` so suites are reproducible and extendable."""
    if config.count < 1:
        raise InfeasibleConfigError("count must be >= 1")
    for p in config.p_values:
        for c in config.cells:
            if GridSpec(int(c), int(p)).n_dofs < 1:
                raise InfeasibleConfigError(f"p={p}, cells={c} gives an empty system")
    if not config.renumberings:
        raise InfeasibleConfigError("at least one renumbering is required")
    out = []
    for b in range(config.count):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, b]))
        p = int(rng.choice(config.p_values))
        mode = int(rng.choice(config.modes))
        size = int(rng.choice(config.sizes))
        cells = int(rng.choice(config.cells))
        eps_max = float(rng.choice(config.eps_max_values))
        eps = rng.uniform(0.0, eps_max, size ** mode)
        base = assemble_diffusion(DiffusionSpec(mode, size, eps, eps_max), GridSpec(cells, p))
        base.seed = config.seed
        base.base_problem_id = f"s{config.seed}-b{b:05d}"
        for r, method in enumerate(config.renumberings):
            out.append(_renumber(base, method, np.random.SeedSequence([config.seed, b, r])))
    return out


def write_suite(directory: str | os.PathLike, instances: Sequence[ProblemInstance]) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    manifest = []
    for inst in instances:
        stem = inst.problem_id
        write_matrix_market(d / f"{stem}.mtx", inst.A)
        np.savetxt(d / f"{stem}.rhs.txt", inst.f, fmt="%.17g")
        entry = inst.manifest_entry()
        entry["matrix"] = f"{stem}.mtx"
        entry["rhs"] = f"{stem}.rhs.txt"
        manifest.append(entry)
    path = d / "manifest.json"
    path.write_text(json.dumps({"schema_version": 1, "problems": manifest}, indent=1))
    return path


def read_suite(directory: str | os.PathLike) -> list[ProblemInstance]:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    out = []
    for e in manifest["problems"]:
        A = read_matrix_market(d / e["matrix"])
        f = np.atleast_1d(np.loadtxt(d / e["rhs"]))
        out.append(ProblemInstance(
            A, f, DiffusionSpec.from_dict(e["diffusion"]), GridSpec(**e["grid"]),
            e["renumbering"], int(e["seed"]), e["base_problem_id"]))
    return out
