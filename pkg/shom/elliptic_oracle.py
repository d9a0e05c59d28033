"""
shom - Elliptic Oracle

Brute-force Dirichlet-Neumann operator on the flattened strip (d = 1).

The fluid domain {-1 + gamma b(X/gamma) < z' < zeta(X)} is mapped to the
flat strip [-L/2, L/2) x [-1, 0] by z' = z + sigma(X, z), with

    sigma = (z + 1) zeta(X) - z gamma b(X/gamma),

and the potential solves  div^mu (P[sigma] grad^mu phi) = 0,  phi = psi at
z = 0, conormal flux zero at z = -1, where grad^mu = (sqrt(mu) d_X, d_z) and

    P = [[ h,                 -sqrt(mu) sigma_X        ],
         [ -sqrt(mu) sigma_X, (1 + mu sigma_X^2) / h   ]],   h = 1 + zeta - gamma b.

Discretization: periodic bilinear (Q1) finite elements on a uniform node
grid, 2x2 Gauss quadrature of P. The DN operator is the discrete conormal
flux at the top nodes (a Schur complement), so the discrete Green identity
and symmetry hold exactly.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from shom.bathymetry import BottomProfile
from shom.config import MIN_DEPTH, ORACLE_CG_MAXITER, ORACLE_CG_TOL, ORACLE_NZ
from shom.errors import DepthError, OracleSolverError
from shom.spectral import SlowField, gradient, spectral_shift, torus_gradient

logger = logging.getLogger(__name__)

# Gauss points on [0, 1] and the Q1 shape functions along one axis
_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_SHAPE = np.stack([1.0 - _GAUSS, _GAUSS])          # [node, point]
_SHAPE_SLOPE = np.array([[-1.0, -1.0], [1.0, 1.0]])  # [node, point]

SOLVERS = ("direct", "cg")


def _local_gradients(dx: float, dz: float) -> tuple[np.ndarray, np.ndarray]:
    """d_X N_a and d_z N_a at the 2x2 Gauss points, indexed [px, pz, a] with a = 2*ax + az."""
    bx = np.einsum("ap,bq->pqab", _SHAPE_SLOPE, _SHAPE) / dx
    bz = np.einsum("ap,bq->pqab", _SHAPE, _SHAPE_SLOPE) / dz
    return bx.reshape(2, 2, 4), bz.reshape(2, 2, 4)


@dataclass(frozen=True)
class StripPotential:
    """Nodal potential on the strip, indexed [x node, z node]."""

    values: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True, eq=False)
class StripProblem:
    """Assembled transformed potential problem for one (zeta, b, mu)."""

    mu: float
    zeta: SlowField
    bottom: BottomProfile
    nz: int
    p11: np.ndarray
    p12: np.ndarray
    p22: np.ndarray
    matrix: sparse.csr_matrix
    solver: str = "direct"
    meta: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.mu))

    @property
    def grid(self):
        return self.zeta.grid

    @property
    def nx(self) -> int:
        return self.grid.n_points

    @property
    def dz(self) -> float:
        return 1.0 / self.nz

    @cached_property
    def z(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.nz + 1)

    @cached_property
    def sigma(self) -> np.ndarray:
        """sigma at the nodes, indexed [x, z]."""
        b = self.bottom.evaluate(self.grid.axis / self.gamma)
        z = self.z[np.newaxis, :]
        return (z + 1.0) * self.zeta.values[:, np.newaxis] - z * self.gamma * b[:, np.newaxis]

    @cached_property
    def _top(self) -> np.ndarray:
        mask = np.zeros((self.nx, self.nz + 1), dtype=bool)
        mask[:, -1] = True
        return mask.reshape(-1)

    @cached_property
    def _blocks(self):
        top = self._top
        free = ~top
        A = self.matrix
        return A[free][:, free].tocsc(), A[free][:, top], A[top][:, free], A[top][:, top]

    @cached_property
    def _factor(self):
        return spla.splu(self._blocks[0])

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of P over all quadrature points (det P = 1)."""
        trace = self.p11 + self.p22
        return float(np.min(0.5 * (trace - np.sqrt(trace ** 2 - 4.0 + 0j).real)))


def build_sigma(
    zeta: SlowField,
    b: BottomProfile,
    mu: float,
    nz: int = ORACLE_NZ,
    alpha: float = MIN_DEPTH,
    solver: str = "direct",
) -> StripProblem:
    """
    Assemble P[sigma] and the Q1 stiffness matrix on the zeta grid x nz vertical cells.

    Raises:
        ValueError: d != 1, mu <= 0, unknown solver.
        DepthError: h = 1 + zeta - gamma b below alpha at a node or quadrature point.
    """
    grid = zeta.grid
    if grid.dim != 1 or b.dim != 1:
        raise ValueError("strip solves are implemented for d = 1")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver '{solver}' (choose from {SOLVERS})")
    if nz < 2:
        raise ValueError(f"nz must be >= 2, got {nz}")
    gamma = float(np.sqrt(mu))
    sqrt_mu = gamma
    n = grid.n_points
    dx = grid.spacing
    dz = 1.0 / nz

    # zeta, zeta_X, b(Y), b'(Y) at the two horizontal Gauss points of every cell: [i, px]
    zeta_x = gradient(zeta)[0]
    zq = np.stack([spectral_shift(zeta, (s * dx,)).values for s in _GAUSS], axis=-1)
    zxq = np.stack([spectral_shift(zeta_x, (s * dx,)).values for s in _GAUSS], axis=-1)
    xq = grid.axis[:, np.newaxis] + _GAUSS[np.newaxis, :] * dx
    bq = b.evaluate(xq / gamma)
    bslope = torus_gradient(b.spectrum)[0]
    byq = bslope.evaluate(xq / gamma)

    h = 1.0 + zq - gamma * bq
    h_nodes = 1.0 + zeta.values - gamma * b.evaluate(grid.axis / gamma)
    worst = min(float(h.min()), float(h_nodes.min()))
    if worst < alpha:
        where = np.unravel_index(int(np.argmin(h)), h.shape)
        raise DepthError(worst, alpha, (float(xq[where]),))

    # sigma_X = (z + 1) zeta_X - z b'(Y) at quadrature points: [i, j, px, pz]
    zgauss = (-1.0 + dz * (np.arange(nz)[:, np.newaxis] + _GAUSS[np.newaxis, :]))
    zg = zgauss[np.newaxis, :, np.newaxis, :]
    sigma_x = (zg + 1.0) * zxq[:, np.newaxis, :, np.newaxis] - zg * byq[:, np.newaxis, :, np.newaxis]
    hq = np.broadcast_to(h[:, np.newaxis, :, np.newaxis], sigma_x.shape)
    p11 = np.array(hq)
    p12 = -sqrt_mu * sigma_x
    p22 = (1.0 + mu * sigma_x ** 2) / hq

    bx, bz = _local_gradients(dx, dz)
    weight = 0.25 * dx * dz
    stiffness = weight * (
        mu * np.einsum("ijpq,pqa,pqb->ijab", p11, bx, bx)
        + sqrt_mu * np.einsum("ijpq,pqa,pqb->ijab", p12, bx, bz)
        + sqrt_mu * np.einsum("ijpq,pqa,pqb->ijab", p12, bz, bx)
        + np.einsum("ijpq,pqa,pqb->ijab", p22, bz, bz)
    )

    # global node index: x-index * (nz + 1) + z-index, local a = 2*ax + az
    i = np.arange(n)[:, np.newaxis, np.newaxis]
    j = np.arange(nz)[np.newaxis, :, np.newaxis]
    ax = np.array([0, 0, 1, 1])
    az = np.array([0, 1, 0, 1])
    nodes = ((i + ax) % n) * (nz + 1) + (j + az)
    rows = np.broadcast_to(nodes[..., :, np.newaxis], stiffness.shape)
    cols = np.broadcast_to(nodes[..., np.newaxis, :], stiffness.shape)
    size = n * (nz + 1)
    matrix = sparse.coo_matrix(
        (stiffness.ravel(), (rows.ravel(), cols.ravel())), shape=(size, size)
    ).tocsr()

    logger.info(f"[ORACLE] assembled strip: nx={n}, nz={nz}, mu={mu:.6g}, min depth {worst:.4f}")
    return StripProblem(mu, zeta, b, nz, p11, p12, p22, matrix, solver, {"min_depth": worst})


def solve_potential(sp: StripProblem, psi: SlowField) -> StripPotential:
    """
    Solve for the nodal potential with phi = psi on the top row.

    Raises:
        OracleSolverError: the iterative solver did not reach ORACLE_CG_TOL.
    """
    sp.zeta._check(psi)
    a_ff, a_ft, _, _ = sp._blocks
    rhs = -(a_ft @ psi.values)
    iterations = 0

    if sp.solver == "direct":
        phi_free = sp._factor.solve(rhs)
    else:
        diag = a_ff.diagonal()
        preconditioner = spla.LinearOperator(a_ff.shape, matvec=lambda v: v / diag)
        counter = {"n": 0}

        def count(_):
            counter["n"] += 1

        phi_free, info = spla.cg(
            a_ff, rhs, rtol=ORACLE_CG_TOL, maxiter=ORACLE_CG_MAXITER, M=preconditioner, callback=count
        )
        iterations = counter["n"]
        if info != 0:
            res = float(np.linalg.norm(a_ff @ phi_free - rhs) / max(np.linalg.norm(rhs), 1e-300))
            raise OracleSolverError(iterations, res)

    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    residual = float(np.linalg.norm(a_ff @ phi_free - rhs) / scale)
    values = np.empty(sp.nx * (sp.nz + 1))
    values[~sp._top] = phi_free
    values[sp._top] = psi.values
    logger.debug(f"[ORACLE] potential solved ({sp.solver}), relative residual {residual:.2e}")
    return StripPotential(values.reshape(sp.nx, sp.nz + 1), residual, iterations)


def dn_apply(sp: StripProblem, psi: SlowField, potential: StripPotential | None = None) -> SlowField:
    """
    G[zeta, gamma b_gamma] psi: the discrete conormal flux e_z . P grad^mu phi at z = 0,
    lumped over the top nodes (flux / dX).
    """
    if potential is None:
        potential = solve_potential(sp, psi)
    _, _, a_tf, a_tt = sp._blocks
    phi_free = potential.values.reshape(-1)[~sp._top]
    flux = a_tf @ phi_free + a_tt @ psi.values
    return SlowField(sp.grid, flux / sp.grid.spacing)


def strip_energy(sp: StripProblem, potential: StripPotential) -> float:
    """int grad^mu phi . P grad^mu phi over the strip, by 2x2 Gauss quadrature per cell."""
    phi = potential.values
    n, nz = sp.nx, sp.nz
    corners = np.stack(
        [phi[:, :-1], phi[:, 1:], np.roll(phi, -1, axis=0)[:, :-1], np.roll(phi, -1, axis=0)[:, 1:]],
        axis=-1,
    )
    bx, bz = _local_gradients(sp.grid.spacing, sp.dz)
    gx = np.sqrt(sp.mu) * np.einsum("pqa,ija->ijpq", bx, corners)
    gz = np.einsum("pqa,ija->ijpq", bz, corners)
    density = sp.p11 * gx ** 2 + 2.0 * sp.p12 * gx * gz + sp.p22 * gz ** 2
    return float(0.25 * sp.grid.spacing * sp.dz * np.sum(density))
