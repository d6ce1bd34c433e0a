"""Dirichlet problems on the disk, DN maps and the Alessandrini pairing.

The forward problem (Delta_g + V) u = 0, u = f on |z| = R, is discretized by
finite volumes on a polar grid: a centre node, rings r_k = k dr for
k = 1..nr, and ntheta nodes per ring.  Multiplying by e^{2 sigma} gives the
symmetric form

    S = K + diag(area * e^{2 sigma} V)

with K the five-point polar stiffness (Dirichlet energy is conformally
invariant, so sigma only enters through the potential term).  The
boundary ring carries half cells, and (S u) on that ring is the weak
Neumann flux: sum_m g_m (S u)_m = int grad u . grad g + V u g dv_g for any
discrete extension g.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BasisMismatch, DirichletEigenvalueSuspected, InvalidGrid, SolverFailure
from .field_core import ComplexField, PotentialSpec, sample_points

COND_LIMIT = 1e12
RESIDUAL_TOL = 1e-10
DEFAULT_N_MAX = 16


class PolarGrid:
    """Centre node plus nr rings of ntheta nodes on the disk of radius ``radius``."""

    def __init__(self, nr=128, ntheta=256, radius=1.0, sigma=None):
        if int(nr) != nr or nr < 32:
            raise InvalidGrid("PolarGrid needs nr >= 32")
        if int(ntheta) != ntheta or ntheta < 64 or ntheta % 2:
            raise InvalidGrid("PolarGrid needs an even ntheta >= 64")
        if not radius > 0:
            raise InvalidGrid("radius must be positive")
        self.nr = int(nr)
        self.ntheta = int(ntheta)
        self.radius = float(radius)
        self.dr = self.radius / self.nr
        self.dtheta = 2.0 * np.pi / self.ntheta
        self.theta = self.dtheta * np.arange(self.ntheta)
        r = self.dr * np.arange(1, self.nr + 1)
        self.r = r
        zr = r[:, None] * np.exp(1j * self.theta)[None, :]
        self.z = np.concatenate([[0j], zr.ravel()])
        self.z.setflags(write=False)
        self.sigma_fn = sigma
        self.sigma = np.zeros(self.size) if sigma is None else np.asarray(sigma(self.z), dtype=float)
        self.area = self._areas()
        self._stiff = None

    @property
    def size(self):
        return 1 + self.nr * self.ntheta

    def index(self, k, m):
        """Node index of ring k >= 1, angle m."""
        return 1 + (k - 1) * self.ntheta + (m % self.ntheta)

    @property
    def boundary(self):
        return np.arange(self.index(self.nr, 0), self.size)

    @property
    def interior(self):
        return np.arange(0, self.index(self.nr, 0))

    def _areas(self):
        dr, dt = self.dr, self.dtheta
        a = np.empty(self.size)
        a[0] = np.pi * (0.5 * dr) ** 2
        for k in range(1, self.nr + 1):
            rk = k * dr
            if k < self.nr:
                ak = rk * dr * dt
            else:
                ak = 0.5 * dt * (rk ** 2 - (rk - 0.5 * dr) ** 2)
            a[self.index(k, 0):self.index(k, 0) + self.ntheta] = ak
        return a

    def stiffness(self):
        """Symmetric five-point polar stiffness matrix (cached)."""
        if self._stiff is not None:
            return self._stiff
        nt, nr, dr, dt = self.ntheta, self.nr, self.dr, self.dtheta
        m = np.arange(nt)
        ii, jj, cc = [], [], []
        # centre to ring 1: the face at r = dr/2 split into nt arcs
        ii.append(np.zeros(nt, dtype=int))
        jj.append(self.index(1, m))
        cc.append(np.full(nt, 0.5 * dt))
        k = np.arange(1, nr + 1)[:, None]
        ext = np.where(k < nr, dr, 0.5 * dr)
        ii.append((1 + (k - 1) * nt + m).ravel())
        jj.append((1 + (k - 1) * nt + (m + 1) % nt).ravel())
        cc.append(np.broadcast_to(ext / (k * dr * dt), (nr, nt)).ravel())
        k = np.arange(1, nr)[:, None]
        ii.append((1 + (k - 1) * nt + m).ravel())
        jj.append((1 + k * nt + m).ravel())
        cc.append(np.broadcast_to((k * dr + 0.5 * dr) * dt / dr, (nr - 1, nt)).ravel())
        i = np.concatenate(ii)
        j = np.concatenate(jj)
        c = np.concatenate(cc)
        rows = np.concatenate([i, j, i, j])
        cols = np.concatenate([i, j, j, i])
        vals = np.concatenate([c, c, -c, -c])
        K = sp.coo_matrix((vals, (rows, cols)), shape=(self.size, self.size)).tocsr()
        K.sum_duplicates()
        self._stiff = K
        return K

    def to_dict(self):
        return {"nr": self.nr, "ntheta": self.ntheta, "radius": self.radius,
                "sigma": None if self.sigma_fn is None else "custom"}


# -- boundary data --------------------------------------------------------

class BoundaryTrace:
    """Coefficients c_n, |n| <= n_max, of sum_n c_n e^{i n theta}."""

    def __init__(self, coeffs, n_max=None):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise BasisMismatch("coefficient vector must have odd length 2 n_max + 1")
        if n_max is not None and c.size != 2 * n_max + 1:
            raise BasisMismatch(f"expected {2 * n_max + 1} coefficients, got {c.size}")
        self.coeffs = c
        self.coeffs.setflags(write=False)

    @property
    def n_max(self):
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self):
        return np.arange(-self.n_max, self.n_max + 1)

    def coeff(self, n):
        return complex(self.coeffs[n + self.n_max]) if abs(n) <= self.n_max else 0j

    @classmethod
    def mode(cls, n, n_max):
        c = np.zeros(2 * n_max + 1, dtype=complex)
        c[n + n_max] = 1.0
        return cls(c)

    @classmethod
    def from_nodal(cls, values, n_max=None):
        """DFT of equispaced samples at theta_m = 2 pi m / N."""
        v = np.asarray(values, dtype=complex).ravel()
        N = v.size
        if n_max is None:
            n_max = N // 2 - 1
        if 2 * n_max + 1 > N:
            raise BasisMismatch(f"{N} nodes cannot carry n_max = {n_max}")
        spec = np.fft.fft(v) / N
        idx = np.arange(-n_max, n_max + 1) % N
        return cls(spec[idx])

    def nodal(self, ntheta):
        if 2 * self.n_max + 1 > ntheta:
            raise BasisMismatch(f"{ntheta} nodes cannot carry n_max = {self.n_max}")
        theta = 2.0 * np.pi * np.arange(ntheta) / ntheta
        return np.exp(1j * np.outer(theta, self.modes)) @ self.coeffs

    def truncate(self, n_max):
        if n_max > self.n_max:
            c = np.zeros(2 * n_max + 1, dtype=complex)
            c[n_max - self.n_max:n_max + self.n_max + 1] = self.coeffs
            return BoundaryTrace(c)
        return BoundaryTrace(self.coeffs[self.n_max - n_max:self.n_max + n_max + 1])

    def to_dict(self):
        return {"n_max": self.n_max, "coeffs": [[c.real, c.imag] for c in self.coeffs]}


# -- potentials on the polar grid -----------------------------------------

def polar_potential(V, grid: PolarGrid):
    """Node values of V: PotentialSpec / ComplexField (bilinear), callable, scalar or array."""
    if V is None:
        return np.zeros(grid.size, dtype=complex)
    if isinstance(V, PotentialSpec):
        V = V.realized
    if isinstance(V, ComplexField):
        if not V.grid.contains(0j, margin=grid.radius):
            raise InvalidGrid("the Cartesian potential grid does not cover the disk")
        return np.asarray(sample_points(V, grid.z), dtype=complex)
    if callable(V):
        return np.asarray(V(grid.z), dtype=complex) * np.ones(grid.size)
    a = np.asarray(V, dtype=complex)
    if a.ndim == 0:
        return np.full(grid.size, complex(a))
    if a.shape != (grid.size,):
        raise InvalidGrid(f"node potential must have {grid.size} values")
    return a


def _potential_tag(vn):
    return hashlib.sha256(np.ascontiguousarray(vn).tobytes()).hexdigest()[:16]


@dataclass
class PolarSolution:
    grid: PolarGrid
    values: np.ndarray
    V: np.ndarray
    residual: float
    condition: float

    def ring(self, k):
        i0 = self.grid.index(k, 0)
        return self.values[i0:i0 + self.grid.ntheta]

    def flux(self):
        """Weak Neumann data on the boundary ring, per unit arc length."""
        g = self.grid
        S = _system(g, self.V)
        out = (S @ self.values)[g.boundary]
        return out / (g.radius * g.dtheta)


def _system(grid, vn):
    mass = grid.area * np.exp(2.0 * grid.sigma)
    S = grid.stiffness().astype(complex) + sp.diags(mass * vn)
    return S.tocsr()


class _Factor:
    def __init__(self, grid, vn):
        self.grid = grid
        S = _system(grid, vn)
        I, B = grid.interior, grid.boundary
        self.S = S
        self.SII = S[I][:, I].tocsc()
        self.SIB = S[I][:, B].tocsr()
        try:
            self.lu = spla.splu(self.SII)
        except RuntimeError as exc:
            raise DirichletEigenvalueSuspected(f"singular interior operator: {exc}") from exc
        self.norm_S = float(spla.norm(self.SII, 1))
        self.condition = self._condition()
        if not np.isfinite(self.condition) or self.condition > COND_LIMIT:
            raise DirichletEigenvalueSuspected(
                f"condition estimate {self.condition:.3e} exceeds {COND_LIMIT:.0e}; "
                "0 is close to a Dirichlet eigenvalue of Delta_g + V")

    def _condition(self):
        """1-norm condition estimate of the pointwise operator A = diag(1/(area e^{2 sigma})) S_II."""
        g = self.grid
        w = (g.area * np.exp(2.0 * g.sigma))[g.interior]
        A = sp.diags(1.0 / w) @ self.SII
        n = A.shape[0]
        inv = spla.LinearOperator(
            (n, n), matvec=lambda x: self.lu.solve(w * np.asarray(x, dtype=complex).ravel()),
            rmatvec=lambda y: w * self.lu.solve(np.asarray(y, dtype=complex).ravel(), trans="H"),
            dtype=complex)
        with np.errstate(all="ignore"):
            return float(spla.onenormest(A) * spla.onenormest(inv))

    def _backward_error(self, x, rhs):
        r = self.SII @ x - rhs
        scale = self.norm_S * np.linalg.norm(x) + np.linalg.norm(rhs)
        return float(np.linalg.norm(r) / scale) if scale > 0 else 0.0

    def solve(self, fb):
        """Interior values for boundary values fb (columns allowed)."""
        rhs = -(self.SIB @ fb)
        x = self.lu.solve(rhs)
        res = self._backward_error(x, rhs)
        if res > RESIDUAL_TOL:
            x = x + self.lu.solve(rhs - self.SII @ x)
            res = self._backward_error(x, rhs)
        if not np.isfinite(res) or res > RESIDUAL_TOL:
            raise SolverFailure(f"Dirichlet solve residual {res:.3e}")
        return x, res


def _boundary_values(f, grid):
    if isinstance(f, BoundaryTrace):
        return f.nodal(grid.ntheta)
    v = np.asarray(f, dtype=complex).ravel()
    if v.size != grid.ntheta:
        raise BasisMismatch(f"nodal boundary data needs {grid.ntheta} values, got {v.size}")
    return v


def solve_dirichlet(V, f, dom: PolarGrid) -> PolarSolution:
    """u with (Delta_g + V) u = 0 in the disk and u = f on the boundary circle."""
    vn = polar_potential(V, dom)
    fac = _Factor(dom, vn)
    fb = _boundary_values(f, dom)
    x, res = fac.solve(fb)
    u = np.empty(dom.size, dtype=complex)
    u[dom.interior] = x
    u[dom.boundary] = fb
    return PolarSolution(dom, u, vn, res, fac.condition)


def dirichlet_eigenvalues(dom: PolarGrid, k=1):
    """Smallest k eigenvalues mu of the discrete Dirichlet problem Delta_g u = mu u.

    With V = -mu the forward problem is singular.
    """
    I = dom.interior
    K = dom.stiffness()[I][:, I].tocsc()
    M = sp.diags(dom.area[I] * np.exp(2.0 * dom.sigma[I])).tocsc()
    vals = spla.eigsh(K, k=k, M=M, sigma=0.0, which="LM", return_eigenvectors=False)
    return np.sort(vals)


# -- DN maps --------------------------------------------------------------

_DN_MAGIC = b"CGODN1\n"


@dataclass
class DNMap:
    """Lambda[j, n] = coefficient j of the Neumann data of e^{i n theta} (index +n_max)."""

    matrix: np.ndarray
    n_max: int
    tag: str
    grid: dict = field(default_factory=dict)

    @property
    def modes(self):
        return np.arange(-self.n_max, self.n_max + 1)

    def entry(self, j, n):
        return complex(self.matrix[j + self.n_max, n + self.n_max])

    def apply(self, f: BoundaryTrace) -> BoundaryTrace:
        if f.n_max != self.n_max:
            raise BasisMismatch(f"trace has n_max = {f.n_max}, DN map has {self.n_max}")
        return BoundaryTrace(self.matrix @ f.coeffs)

    def pair(self, f: BoundaryTrace, g: BoundaryTrace) -> complex:
        """<Lambda f, g> = int (Lambda f) g dtheta = 2 pi sum_n (Lambda f)_n g_{-n}."""
        if g.n_max != self.n_max:
            raise BasisMismatch(f"trace has n_max = {g.n_max}, DN map has {self.n_max}")
        lf = self.apply(f).coeffs
        return complex(2.0 * np.pi * np.sum(lf * g.coeffs[::-1]))

    def reciprocity_defect(self):
        """||J L - (J L)^T|| / ||L|| with J the mode flip n -> -n."""
        JL = self.matrix[::-1, :]
        return float(np.linalg.norm(JL - JL.T) / np.linalg.norm(self.matrix))

    def __sub__(self, other):
        if other.n_max != self.n_max:
            raise BasisMismatch("DN maps with different n_max")
        return DNMap(self.matrix - other.matrix, self.n_max, f"{self.tag}-{other.tag}", self.grid)

    def to_bytes(self):
        head = json.dumps({"n_max": self.n_max, "tag": self.tag, "grid": self.grid,
                           "shape": list(self.matrix.shape), "dtype": "<f8 re/im interleaved, row-major"},
                          sort_keys=True).encode()
        body = np.empty(self.matrix.shape + (2,), dtype="<f8")
        body[..., 0] = self.matrix.real
        body[..., 1] = self.matrix.imag
        return _DN_MAGIC + struct.pack("<I", len(head)) + head + body.tobytes()

    @classmethod
    def from_bytes(cls, data):
        if not data.startswith(_DN_MAGIC):
            raise ValueError("not a DN map file")
        off = len(_DN_MAGIC)
        (hl,) = struct.unpack_from("<I", data, off)
        off += 4
        head = json.loads(data[off:off + hl].decode())
        off += hl
        n = 2 * head["n_max"] + 1
        body = np.frombuffer(data, dtype="<f8", offset=off)
        if body.size != n * n * 2:
            raise ValueError("DN map payload has the wrong size")
        body = body.reshape(n, n, 2)
        return cls(body[..., 0] + 1j * body[..., 1], head["n_max"], head["tag"], head["grid"])

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def dn_assemble(V, n_max, dom: PolarGrid) -> DNMap:
    """DN map in the basis e^{i n theta}, |n| <= n_max, from weak Neumann fluxes."""
    n_max = int(n_max)
    if n_max < 0 or 2 * n_max + 1 > dom.ntheta // 2:
        raise BasisMismatch(f"n_max = {n_max} is too large for ntheta = {dom.ntheta}")
    vn = polar_potential(V, dom)
    fac = _Factor(dom, vn)
    modes = np.arange(-n_max, n_max + 1)
    F = np.exp(1j * np.outer(dom.theta, modes))
    X, _ = fac.solve(F)
    U = np.empty((dom.size, modes.size), dtype=complex)
    U[dom.interior] = X
    U[dom.boundary] = F
    flux = (fac.S @ U)[dom.boundary] / (dom.radius * dom.dtheta)
    spec = np.fft.fft(flux, axis=0) / dom.ntheta
    L = spec[modes % dom.ntheta, :]
    return DNMap(L, n_max, _potential_tag(vn), dom.to_dict())


# -- Alessandrini pairing -------------------------------------------------

def _interior_pair(dV, u, v, dom=None):
    from .cgo_builder import CGOSolution

    if isinstance(u, PolarSolution) or isinstance(v, PolarSolution):
        g = u.grid if isinstance(u, PolarSolution) else v.grid
        uv = u.values if isinstance(u, PolarSolution) else np.asarray(u)
        vv = v.values if isinstance(v, PolarSolution) else np.asarray(v)
        dv = polar_potential(dV, g)
        return complex(np.sum(uv * dv * vv * g.area * np.exp(2.0 * g.sigma)))
    if isinstance(u, CGOSolution) and isinstance(v, CGOSolution):
        # combine the phase exponents before exponentiating; each factor alone may overflow
        ph = np.exp(u.phase_exponent() + v.phase_exponent())
        prod = ph * u.series_values() * v.series_values()
        grid = u.grid
        dom = dom or u.phase.dom
    else:
        uu = u.assembled if isinstance(u, CGOSolution) else u
        vv = v.assembled if isinstance(v, CGOSolution) else v
        grid = uu.grid
        prod = uu.values * vv.values
    if isinstance(dV, PotentialSpec):
        dV = dV.realized
    dvv = dV.values if isinstance(dV, ComplexField) else np.broadcast_to(np.asarray(dV), grid.shape)
    w = np.exp(2.0 * dom.sigma.values.real) if dom is not None else 1.0
    return complex(np.sum(prod * dvv * w) * grid.h ** 2)


def alessandrini_pair(V1, V2, u, v, mode="interior", dom=None):
    """int u (V1 - V2) v dv_g, computed in the interior or from boundary data.

    interior: V1, V2 are potentials (or V2 None); u, v are PolarSolutions,
        Cartesian fields or CGOSolutions.
    boundary: V1, V2 are DNMaps; u, v are BoundaryTraces (Dirichlet data).
        Returns <(Lambda_1 - Lambda_2) f, g>.
    """
    if mode == "boundary":
        if not isinstance(V1, DNMap) or not isinstance(V2, DNMap):
            raise TypeError("boundary mode needs two DNMaps")
        for t in (u, v):
            if not isinstance(t, BoundaryTrace) or t.n_max != V1.n_max:
                raise BasisMismatch("boundary traces must match the DN map basis")
        return (V1 - V2).pair(u, v)
    if mode != "interior":
        raise ValueError("mode must be 'interior' or 'boundary'")
    dV = _difference(V1, V2)
    return _interior_pair(dV, u, v, dom)


def _difference(V1, V2):
    if isinstance(V1, PotentialSpec):
        V1 = V1.realized
    if isinstance(V2, PotentialSpec):
        V2 = V2.realized
    if V2 is None:
        return V1
    if callable(V1) or callable(V2):
        f1 = V1 if callable(V1) else (lambda z, c=V1: c)
        f2 = V2 if callable(V2) else (lambda z, c=V2: c)
        return lambda z: f1(z) - f2(z)
    return V1 - V2
