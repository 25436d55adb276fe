"""Single-particle lattice dynamics and the dense kernels built on it.

Everything here works in units with hbar = 1 and unit lattice spacing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
MAX_PERMANENT_SIZE = 20


@dataclass(frozen=True)
class LatticeSpec:
    """A finite 1-D lattice with nearest-neighbour hopping.

    Parameters
    ----------
    sites : int
        Number of lattice sites, at least 2.
    boundary : {"periodic", "open"}
    hopping : float
        Hopping energy.
    potential : float or sequence of float
        On-site energies; a scalar is broadcast to every site.
    dt : float
        Default propagation step, strictly positive.
    """

    sites: int
    boundary: str = "periodic"
    hopping: float = 1.0
    potential: tuple = field(default=0.0)
    dt: float = 0.1

    def __post_init__(self):
        if int(self.sites) != self.sites or self.sites < 2:
            raise ValueError(f"sites must be an integer >= 2, got {self.sites!r}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        pot = np.broadcast_to(np.asarray(self.potential, dtype=float), (self.sites,)) \
            if np.ndim(self.potential) == 0 else np.asarray(self.potential, dtype=float)
        if pot.shape != (self.sites,):
            raise ValueError(
                f"potential has length {pot.shape[0] if pot.ndim else 0}, expected {self.sites}")
        if not np.all(np.isfinite(pot)):
            raise ValueError("potential must be finite")
        object.__setattr__(self, "sites", int(self.sites))
        object.__setattr__(self, "potential", tuple(float(v) for v in pot))


@dataclass(frozen=True)
class Propagator:
    """Unitary single-particle propagator ``U[to, from]`` over ``interval``."""

    matrix: np.ndarray
    interval: tuple = (0.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def sites(self):
        return self.matrix.shape[0]

    def __matmul__(self, other):
        """Compose: ``V @ U`` is U followed by V."""
        return Propagator(self.matrix @ other.matrix, (other.interval[0], self.interval[1]))


def build_hamiltonian(spec):
    """Tight-binding Hamiltonian of ``spec`` as a dense Hermitian matrix."""
    n = spec.sites
    H = np.diag(np.asarray(spec.potential, dtype=complex))
    for i in range(n - 1):
        H[i, i + 1] -= spec.hopping
        H[i + 1, i] -= spec.hopping
    if spec.boundary == "periodic":
        # for n == 2 the wrap bond doubles the single bond
        H[n - 1, 0] -= spec.hopping
        H[0, n - 1] -= spec.hopping
    return H


def hermitian_defect(H):
    H = np.asarray(H)
    return float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0


def check_hermitian(H, tol=HERMITIAN_TOL):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {H.shape}")
    defect = hermitian_defect(H)
    if defect > tol:
        raise ValueError(f"Hamiltonian is not Hermitian (defect {defect:.3e} > {tol:.0e})")
    return H


def expm_hermitian(H, t):
    """``exp(-i H t)`` for Hermitian ``H`` by eigendecomposition."""
    H = check_hermitian(H)
    if t == 0:
        return np.eye(H.shape[0], dtype=complex)
    evals, evecs = np.linalg.eigh(H)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def propagator(H, t, t0=0.0):
    """Single-particle propagator for a time interval of length ``t``."""
    return Propagator(expm_hermitian(H, t), (float(t0), float(t0) + float(t)))


def unitarity_defect(U):
    U = np.asarray(getattr(U, "matrix", U))
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def gaussian_packet(spec, x0, p0=0.0, sigma=1.0):
    """Normalized Gaussian wavepacket centred at site ``x0`` with momentum ``p0``.

    Raises
    ------
    ValueError
        If ``sigma <= 0`` or the packet has no weight on the lattice.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    x = np.arange(spec.sites, dtype=float)
    psi = np.exp(-(x - x0) ** 2 / (4.0 * sigma ** 2) + 1j * p0 * x)
    norm = np.linalg.norm(psi)
    if not norm > 1e-150:
        raise ValueError(f"packet at x0={x0} has no weight on a {spec.sites}-site lattice")
    return psi / norm


def determinant(M):
    # LAPACK getrf (LU with partial pivoting); exact zero for singular input
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"determinant needs a non-empty square matrix, got shape {M.shape}")
    return complex(np.linalg.det(M))


def permanent(M):
    """Permanent of a square matrix via Ryser's formula in Gray-code order.

    Costs ``O(2**n * n)``; sizes above 20 are refused.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"permanent needs a non-empty square matrix, got shape {M.shape}")
    n = M.shape[0]
    if n > MAX_PERMANENT_SIZE:
        raise ValueError(f"permanent of a {n}x{n} matrix exceeds the size limit {MAX_PERMANENT_SIZE}")
    if n == 1:
        return complex(M[0, 0])
    if n == 2:
        return complex(M[0, 0] * M[1, 1] + M[0, 1] * M[1, 0])
    # Ryser: per(M) = (-1)^n sum_S (-1)^|S| prod_i sum_{j in S} M[i, j]
    columns = M.T.tolist()
    row_sums = [0j] * n
    total = 0j
    gray = 0
    size = 0
    for k in range(1, 1 << n):
        flip = (k & -k).bit_length() - 1
        col = columns[flip]
        if gray >> flip & 1:
            for i in range(n):
                row_sums[i] -= col[i]
            size -= 1
        else:
            for i in range(n):
                row_sums[i] += col[i]
            size += 1
        gray ^= 1 << flip
        prod = 1 + 0j
        for v in row_sums:
            prod *= v
        total += -prod if size & 1 else prod
    return complex(total if n % 2 == 0 else -total)
