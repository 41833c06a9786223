"""Eigenpairs of ``A = rho^-1 (-(a u')' + q u)`` with Dirichlet or Neumann
conditions, boundary-trace pairings and fractional-power norms.

Intervals use piecewise-linear finite elements with variable coefficients.
Rectangles are restricted to constant coefficients and use the closed-form
tensor-product modes.

Boundary kinds follow the convention ``chi = 0`` (Dirichlet: the datum is
the trace of ``u``) and ``chi = 1`` (Neumann: the datum is the conormal
derivative). The pairing ``<h, tau* phi_n>`` pairs a boundary datum with the
*other* trace of ``phi_n``: the conormal derivative for ``chi = 0`` and the
boundary values for ``chi = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

__all__ = [
    "BasisError",
    "Coefficients",
    "Interval",
    "Rectangle",
    "SpectralBasis",
    "build_basis",
    "fractional_norm",
    "lemma_l1_diagnostic",
    "load_basis",
    "project",
    "save_basis",
    "trace_pairing",
]

CoefficientLike = Union[float, Callable[..., np.ndarray]]

DIRICHLET = 0
NEUMANN = 1


class BasisError(ValueError):
    """Invalid basis request (coarse mesh, bad coefficients, bad index)."""


@dataclass(frozen=True)
class Interval:
    x0: float = 0.0
    x1: float = 1.0

    def __post_init__(self) -> None:
        if not self.x1 > self.x0:
            raise BasisError(f"empty interval ({self.x0}, {self.x1})")

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    kind = "interval"


@dataclass(frozen=True)
class Rectangle:
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self) -> None:
        if self.lx <= 0 or self.ly <= 0:
            raise BasisError("rectangle sides must be positive")

    kind = "rectangle"


Domain = Union[Interval, Rectangle]


def _as_callable(c: CoefficientLike) -> Callable[..., np.ndarray]:
    if callable(c):
        return c
    value = float(c)
    return lambda *xs: np.full(np.shape(xs[0]), value)


@dataclass(frozen=True)
class Coefficients:
    """Density ``rho``, diffusivity ``a`` and potential ``q``.

    Each entry is a constant or a vectorized callable of the coordinates.
    """

    rho: CoefficientLike = 1.0
    a: CoefficientLike = 1.0
    q: CoefficientLike = 1.0

    def eval(self, name: str, *xs: np.ndarray) -> np.ndarray:
        return np.asarray(_as_callable(getattr(self, name))(*xs), dtype=float) + 0.0 * xs[0]

    def is_constant(self) -> bool:
        return not any(callable(getattr(self, n)) for n in ("rho", "a", "q"))

    def validate(self, *xs: np.ndarray) -> None:
        """Check positivity of ``rho``, ``a`` and ``q`` on sample points."""
        checks = (
            ("rho", "density rho must satisfy 0 < rho_0 <= rho"),
            ("a", "diffusivity a must satisfy the ellipticity bound a >= c > 0"),
            ("q", "potential q must satisfy q >= q_0 > 0"),
        )
        for name, msg in checks:
            v = self.eval(name, *xs)
            if not np.all(np.isfinite(v)):
                raise BasisError(f"{name} is not finite on the mesh")
            if np.min(v) <= 0.0:
                raise BasisError(f"{msg} (min {np.min(v):.3g})")


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First ``N`` eigenpairs of ``A_chi`` on a mesh.

    ``eigenfunctions[n]`` holds nodal values (flattened for rectangles),
    orthonormal for ``<u, v> = u @ mass_rho @ v``. ``traces[n, b]`` is
    ``(tau_chi^* phi_n)`` at boundary sample ``b``, and a boundary datum ``h``
    sampled at ``boundary_points`` pairs as ``traces @ (boundary_weights * h)``.
    """

    chi: int
    domain: Domain
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    traces: np.ndarray
    nodes: np.ndarray
    mass_rho: scipy.sparse.spmatrix
    mass: scipy.sparse.spmatrix
    boundary_points: np.ndarray
    boundary_weights: np.ndarray
    mesh_size: int
    coefficients: Coefficients | None = None
    stiffness: scipy.sparse.spmatrix | None = None
    mode_indices: np.ndarray | None = None
    boundary_edges: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def n_boundary(self) -> int:
        return int(self.boundary_weights.shape[0])

    def _weighted(self, which: str) -> np.ndarray:
        if which not in self._cache:
            m = self.mass_rho if which == "rho" else self.mass
            self._cache[which] = np.asarray(m @ self.eigenfunctions.T)
        return self._cache[which]

    def project(self, g: np.ndarray) -> np.ndarray:
        """``<g, phi_n>`` in ``L^2(rho dx)``; ``g`` sampled on the nodes (last axis)."""
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.nodes.shape[0]:
            raise BasisError(
                f"field has {g.shape[-1]} samples, mesh has {self.nodes.shape[0]} nodes"
            )
        return g @ self._weighted("rho")

    def project_source(self, F: np.ndarray) -> np.ndarray:
        """``<rho^-1 F, phi_n>`` in ``L^2(rho dx)``, i.e. the plain integral of ``F phi_n``."""
        F = np.asarray(F, dtype=float)
        if F.shape[-1] != self.nodes.shape[0]:
            raise BasisError(
                f"field has {F.shape[-1]} samples, mesh has {self.nodes.shape[0]} nodes"
            )
        return F @ self._weighted("plain")

    def pair_boundary(self, h: np.ndarray) -> np.ndarray:
        """``<h, tau* phi_n>`` for every mode; ``h`` sampled on boundary points (last axis)."""
        h = np.asarray(h, dtype=float)
        if h.shape[-1] != self.n_boundary:
            raise BasisError(
                f"boundary datum has {h.shape[-1]} samples, expected {self.n_boundary}"
            )
        return (h * self.boundary_weights) @ self.traces.T

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values of ``sum_n c_n phi_n`` (modes on the last axis of ``coeffs``)."""
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ self.eigenfunctions[: coeffs.shape[-1]]

    def l2_norm(self, values: np.ndarray) -> np.ndarray:
        """Unweighted ``L^2`` norm of nodal fields (last axis)."""
        values = np.asarray(values, dtype=float)
        mv = (self.mass @ values.reshape(-1, values.shape[-1]).T).T.reshape(values.shape)
        return np.sqrt(np.maximum(np.sum(values * mv, axis=-1), 0.0))

    def restrict(self, N: int) -> "SpectralBasis":
        """Basis with only the first ``N`` modes (shares the mesh data)."""
        if not 1 <= N <= self.N:
            raise BasisError(f"cannot restrict {self.N} modes to {N}")
        return SpectralBasis(
            chi=self.chi,
            domain=self.domain,
            eigenvalues=self.eigenvalues[:N],
            eigenfunctions=self.eigenfunctions[:N],
            traces=self.traces[:N],
            nodes=self.nodes,
            mass_rho=self.mass_rho,
            mass=self.mass,
            boundary_points=self.boundary_points,
            boundary_weights=self.boundary_weights,
            mesh_size=self.mesh_size,
            coefficients=self.coefficients,
            stiffness=self.stiffness,
            mode_indices=None if self.mode_indices is None else self.mode_indices[:N],
            boundary_edges=self.boundary_edges,
        )


# --------------------------------------------------------------------------
# interval: P1 finite elements

_GAUSS3_X, _GAUSS3_W = np.polynomial.legendre.leggauss(3)


def _assemble_interval(domain: Interval, coeffs: Coefficients, M: int):
    """Tridiagonal stiffness (a, q) and mass (rho, plain) matrices on all nodes."""
    nodes = np.linspace(domain.x0, domain.x1, M + 1)
    h = domain.length / M
    left = nodes[:-1]
    # Gauss points per element, shape (M, 3)
    xg = left[:, None] + 0.5 * h * (1.0 + _GAUSS3_X[None, :])
    wg = 0.5 * h * _GAUSS3_W[None, :]
    coeffs.validate(xg.ravel())
    a = coeffs.eval("a", xg)
    q = coeffs.eval("q", xg)
    rho = coeffs.eval("rho", xg)
    n0 = 1.0 - (xg - left[:, None]) / h
    n1 = 1.0 - n0

    def local(wfun):
        return (
            np.sum(wg * wfun * n0 * n0, axis=1),
            np.sum(wg * wfun * n0 * n1, axis=1),
            np.sum(wg * wfun * n1 * n1, axis=1),
        )

    ka = np.sum(wg * a, axis=1) / h**2
    stiff_local = (ka, -ka, ka)
    q_local = local(q)
    rho_local = local(rho)
    one_local = local(np.ones_like(xg))

    def assemble(parts):
        m00, m01, m11 = parts
        diag = np.zeros(M + 1)
        diag[:-1] += m00
        diag[1:] += m11
        return scipy.sparse.diags([m01, diag, m01], [-1, 0, 1], format="csr")

    K = assemble(tuple(s + ql for s, ql in zip(stiff_local, q_local)))
    M_rho = assemble(rho_local)
    M_plain = assemble(one_local)
    return nodes, K, M_rho, M_plain


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first clearly nonzero nodal value positive, scanning from the left end
    out = vectors.copy()
    for n in range(out.shape[0]):
        v = out[n]
        idx = np.flatnonzero(np.abs(v) > 1e-8 * np.max(np.abs(v)))
        if idx.size and v[idx[0]] < 0:
            out[n] = -v
    return out


def _interval_basis(domain, coeffs, chi, N, M, trace_method):
    nodes, K, M_rho, M_plain = _assemble_interval(domain, coeffs, M)
    if chi == DIRICHLET:
        dof = np.arange(1, M)
    else:
        dof = np.arange(0, M + 1)
    if N > dof.size:
        raise BasisError(f"requested {N} modes but only {dof.size} degrees of freedom")
    Kd = K[dof][:, dof]
    Md = M_rho[dof][:, dof]
    if dof.size <= 2000:
        lam, vec = scipy.linalg.eigh(
            Kd.toarray(), Md.toarray(), subset_by_index=[0, N - 1]
        )
    else:
        lam, vec = scipy.sparse.linalg.eigsh(
            Kd.tocsc(), k=N, M=Md.tocsc(), sigma=0.0, which="LM"
        )
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
        norms = np.sqrt(np.einsum("in,in->n", vec, Md @ vec))
        vec = vec / norms
    phi = np.zeros((N, M + 1))
    phi[:, dof] = vec.T
    phi = _fix_signs(phi)

    if chi == DIRICHLET:
        if trace_method == "flux":
            # boundary rows of the discrete residual: a dphi/dnu at x0, x1
            resid = (K @ phi.T).T - lam[:, None] * (M_rho @ phi.T).T
            traces = np.stack([resid[:, 0], resid[:, -1]], axis=1)
        elif trace_method == "onesided":
            h = domain.length / M
            a_b = coeffs.eval("a", np.array([domain.x0, domain.x1]))
            d0 = (-3 * phi[:, 0] + 4 * phi[:, 1] - phi[:, 2]) / (2 * h)
            d1 = (3 * phi[:, -1] - 4 * phi[:, -2] + phi[:, -3]) / (2 * h)
            traces = np.stack([-a_b[0] * d0, a_b[1] * d1], axis=1)
        else:
            raise BasisError(f"unknown trace method {trace_method!r}")
    else:
        traces = np.stack([phi[:, 0], phi[:, -1]], axis=1)

    return SpectralBasis(
        chi=chi,
        domain=domain,
        eigenvalues=np.asarray(lam, dtype=float),
        eigenfunctions=phi,
        traces=traces,
        nodes=nodes,
        mass_rho=M_rho,
        mass=M_plain,
        boundary_points=np.array([[domain.x0], [domain.x1]]),
        boundary_weights=np.ones(2),
        mesh_size=M,
        coefficients=coeffs,
        stiffness=K,
    )


# --------------------------------------------------------------------------
# rectangle: closed-form tensor modes, constant coefficients


def _rectangle_basis(domain: Rectangle, coeffs: Coefficients, chi, N, M):
    if not coeffs.is_constant():
        raise BasisError("rectangles support constant coefficients only")
    rho, a, q = (float(getattr(coeffs, n)) for n in ("rho", "a", "q"))
    coeffs.validate(np.zeros(1))
    lx, ly = domain.lx, domain.ly
    start = 1 if chi == DIRICHLET else 0
    kmax = start + int(math.ceil(math.sqrt(N))) + 2
    while True:
        cand = [
            (a / rho * ((j * math.pi / lx) ** 2 + (k * math.pi / ly) ** 2) + q / rho, j, k)
            for j in range(start, kmax + 1)
            for k in range(start, kmax + 1)
        ]
        cand.sort()
        sel = cand[:N]
        # enough candidates when the largest selected index is interior to the box
        if max(max(j, k) for _, j, k in sel) < kmax:
            break
        kmax *= 2
    lam = np.array([c[0] for c in sel])
    idx = np.array([[c[1], c[2]] for c in sel], dtype=int)
    if M < 4 * int(idx.max(initial=1)):
        raise BasisError(f"mesh_size {M} too coarse for mode indices up to {idx.max()}")

    x = np.linspace(0.0, lx, M + 1)
    y = np.linspace(0.0, ly, M + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)

    def f1(j, s, L):
        if chi == DIRICHLET:
            return math.sqrt(2.0 / L) * np.sin(j * math.pi * s / L)
        c = math.sqrt((1.0 if j == 0 else 2.0) / L)
        return c * np.cos(j * math.pi * s / L)

    def df1(j, s, L):
        if chi == DIRICHLET:
            return math.sqrt(2.0 / L) * (j * math.pi / L) * np.cos(j * math.pi * s / L)
        c = math.sqrt((1.0 if j == 0 else 2.0) / L)
        return -c * (j * math.pi / L) * np.sin(j * math.pi * s / L)

    scale = 1.0 / math.sqrt(rho)
    phi = np.empty((N, nodes.shape[0]))
    for n, (j, k) in enumerate(idx):
        phi[n] = scale * np.outer(f1(j, x, lx), f1(k, y, ly)).ravel()

    # edge samples: bottom (y=0), right (x=lx), top (y=ly), left (x=0)
    nq = max(8, 4 * int(idx.max(initial=1)))
    gx, gw = np.polynomial.legendre.leggauss(nq)
    sx = 0.5 * lx * (gx + 1.0)
    sy = 0.5 * ly * (gx + 1.0)
    wx = 0.5 * lx * gw
    wy = 0.5 * ly * gw
    pts = np.concatenate(
        [
            np.stack([sx, np.zeros(nq)], 1),
            np.stack([np.full(nq, lx), sy], 1),
            np.stack([sx, np.full(nq, ly)], 1),
            np.stack([np.zeros(nq), sy], 1),
        ]
    )
    weights = np.concatenate([wx, wy, wx, wy])
    edges = np.repeat(np.arange(4), nq)
    traces = np.empty((N, 4 * nq))
    for n, (j, k) in enumerate(idx):
        if chi == DIRICHLET:
            # conormal derivative a * d(phi)/d(nu), outward normals
            bottom = -a * f1(j, sx, lx) * df1(k, 0.0, ly)
            right = a * df1(j, lx, lx) * f1(k, sy, ly)
            top = a * f1(j, sx, lx) * df1(k, ly, ly)
            left = -a * df1(j, 0.0, lx) * f1(k, sy, ly)
        else:
            bottom = f1(j, sx, lx) * f1(k, 0.0, ly)
            right = f1(j, lx, lx) * f1(k, sy, ly)
            top = f1(j, sx, lx) * f1(k, ly, ly)
            left = f1(j, 0.0, lx) * f1(k, sy, ly)
        traces[n] = scale * np.concatenate([bottom, right, top, left])

    # trapezoid weights: exact orthogonality of the discrete sines/cosines
    tx = np.full(M + 1, lx / M)
    tx[[0, -1]] *= 0.5
    ty = np.full(M + 1, ly / M)
    ty[[0, -1]] *= 0.5
    w = np.outer(tx, ty).ravel()
    mass = scipy.sparse.diags(w)
    return SpectralBasis(
        chi=chi,
        domain=domain,
        eigenvalues=lam,
        eigenfunctions=phi,
        traces=traces,
        nodes=nodes,
        mass_rho=scipy.sparse.diags(rho * w),
        mass=mass,
        boundary_points=pts,
        boundary_weights=weights,
        mesh_size=M,
        coefficients=coeffs,
        mode_indices=idx,
        boundary_edges=edges,
    )


def build_basis(
    domain: Domain,
    coeffs: Coefficients,
    chi: int,
    N: int,
    mesh_size: int,
    trace_method: str = "flux",
) -> SpectralBasis:
    """First ``N`` eigenpairs of ``A_chi`` on a uniform mesh.

    ``trace_method`` selects how Dirichlet conormal traces are extracted on
    intervals: ``"flux"`` (boundary rows of the discrete residual, consistent
    with the discrete Green identity) or ``"onesided"`` (second-order
    one-sided differences).
    """
    if chi not in (DIRICHLET, NEUMANN):
        raise BasisError(f"chi must be 0 (Dirichlet) or 1 (Neumann), got {chi!r}")
    if N < 1:
        raise BasisError("N must be at least 1")
    if isinstance(domain, Interval):
        if mesh_size < 10 * N:
            raise BasisError(
                f"mesh too coarse: mesh_size={mesh_size} must be >= 10*N={10 * N}"
            )
        return _interval_basis(domain, coeffs, chi, N, mesh_size, trace_method)
    if isinstance(domain, Rectangle):
        return _rectangle_basis(domain, coeffs, chi, N, mesh_size)
    raise BasisError(f"unsupported domain {domain!r}")


def trace_pairing(basis: SpectralBasis, n: int, h: Sequence[float] | np.ndarray) -> float:
    """``<h, tau_chi^* phi_n>`` for the 1-based mode index ``n``."""
    if not 1 <= n <= basis.N:
        raise BasisError(f"mode index {n} out of range 1..{basis.N}")
    h = np.asarray(h, dtype=float)
    if h.shape != (basis.n_boundary,):
        raise BasisError(f"boundary datum must have shape ({basis.n_boundary},)")
    return float(np.dot(basis.boundary_weights * h, basis.traces[n - 1]))


def project(basis: SpectralBasis, g) -> np.ndarray:
    """Coefficients ``<g, phi_n>``; ``g`` is nodal samples or a callable of the coordinates."""
    if callable(g):
        if basis.nodes.ndim == 1:
            g = g(basis.nodes)
        else:
            g = g(basis.nodes[:, 0], basis.nodes[:, 1])
    return basis.project(g)


def fractional_norm(coeffs, eigenvalues, s: float) -> float | np.ndarray:
    """``(sum_n c_n^2 lambda_n^(2s))^(1/2)``; negative ``s`` gives the dual norm."""
    c = np.asarray(coeffs, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    if c.shape[-1] != lam.shape[-1]:
        raise BasisError("coefficient and eigenvalue sequences differ in length")
    out = np.sqrt(np.sum(c**2 * lam ** (2.0 * s), axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def lemma_l1_diagnostic(basis: SpectralBasis, h, theta: float) -> np.ndarray:
    """Partial sums ``S_N = sum_{n<=N} lambda_n^(-2(1+kappa)) |<h, tau* phi_n>|^2``.

    ``kappa = (2 theta - 1) / 4``; requires ``theta >= 1/2``.
    """
    if theta < 0.5:
        raise BasisError("theta must be >= 1/2")
    kappa = (2.0 * theta - 1.0) / 4.0
    pair = basis.pair_boundary(np.asarray(h, dtype=float))
    terms = basis.eigenvalues ** (-2.0 * (1.0 + kappa)) * pair**2
    return np.cumsum(terms)


# --------------------------------------------------------------------------
# columnar export

_MAGIC = "# fracspec-basis v1"


def _fmt(v: float) -> str:
    return repr(float(v))


def save_basis(basis: SpectralBasis, path) -> None:
    """Write the basis as a plain-text columnar file.

    Layout::

        # fracspec-basis v1
        # chi=<0|1> N=<modes> mesh_size=<M> domain=<interval|rectangle> <extent>
        # n_nodes=<P> n_boundary=<B>
        [modes]        N rows: lambda_n, trace_1 .. trace_B
        [boundary]     B rows: coordinates..., weight
        [nodes]        P rows: coordinates...
        [mass_rho]     P rows: row-compressed entries "col:value" separated by spaces
        [mass]         same layout for the unweighted mass
        [eigenvectors] N rows of P nodal values
    """
    lines = [_MAGIC]
    d = basis.domain
    extent = (
        f"x0={_fmt(d.x0)} x1={_fmt(d.x1)}"
        if isinstance(d, Interval)
        else f"lx={_fmt(d.lx)} ly={_fmt(d.ly)}"
    )
    lines.append(
        f"# chi={basis.chi} N={basis.N} mesh_size={basis.mesh_size} domain={d.kind} {extent}"
    )
    lines.append(f"# n_nodes={basis.nodes.shape[0]} n_boundary={basis.n_boundary}")
    lines.append("[modes]")
    for lam, tr in zip(basis.eigenvalues, basis.traces):
        lines.append(",".join([_fmt(lam)] + [_fmt(v) for v in tr]))
    lines.append("[boundary]")
    for p, w in zip(basis.boundary_points, basis.boundary_weights):
        lines.append(",".join([_fmt(v) for v in np.atleast_1d(p)] + [_fmt(w)]))
    lines.append("[nodes]")
    nodes = basis.nodes.reshape(basis.nodes.shape[0], -1)
    for p in nodes:
        lines.append(",".join(_fmt(v) for v in p))
    for name in ("mass_rho", "mass"):
        lines.append(f"[{name}]")
        m = getattr(basis, name).tocsr()
        for i in range(m.shape[0]):
            lo, hi = m.indptr[i], m.indptr[i + 1]
            lines.append(
                " ".join(f"{j}:{_fmt(v)}" for j, v in zip(m.indices[lo:hi], m.data[lo:hi]))
            )
    lines.append("[eigenvectors]")
    for v in basis.eigenfunctions:
        lines.append(",".join(_fmt(x) for x in v))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_basis(path) -> SpectralBasis:
    """Read a file written by :func:`save_basis`."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != _MAGIC:
        raise BasisError(f"{path}: not a fracspec basis file")
    header = {}
    for line in raw[1:3]:
        for tok in line.lstrip("#").split():
            key, _, val = tok.partition("=")
            header[key] = val
    sections: dict[str, list[str]] = {}
    current = None
    for line in raw[3:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    chi = int(header["chi"])
    if header["domain"] == "interval":
        domain: Domain = Interval(float(header["x0"]), float(header["x1"]))
    else:
        domain = Rectangle(float(header["lx"]), float(header["ly"]))
    modes = np.array([[float(v) for v in r.split(",")] for r in sections["modes"]])
    bnd = np.array([[float(v) for v in r.split(",")] for r in sections["boundary"]])
    nodes = np.array([[float(v) for v in r.split(",")] for r in sections["nodes"]])
    if nodes.shape[1] == 1:
        nodes = nodes[:, 0]
    P = nodes.shape[0]

    def sparse(rows):
        data, ii, jj = [], [], []
        for i, r in enumerate(rows):
            for tok in r.split():
                j, _, v = tok.partition(":")
                ii.append(i)
                jj.append(int(j))
                data.append(float(v))
        return scipy.sparse.csr_matrix((data, (ii, jj)), shape=(P, P))

    vecs = np.array([[float(v) for v in r.split(",")] for r in sections["eigenvectors"]])
    return SpectralBasis(
        chi=chi,
        domain=domain,
        eigenvalues=modes[:, 0].copy(),
        eigenfunctions=vecs,
        traces=modes[:, 1:].copy(),
        nodes=nodes,
        mass_rho=sparse(sections["mass_rho"]),
        mass=sparse(sections["mass"]),
        boundary_points=bnd[:, :-1],
        boundary_weights=bnd[:, -1].copy(),
        mesh_size=int(header["mesh_size"]),
    )
