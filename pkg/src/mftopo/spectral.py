"""Discrete Laplace-Beltrami operator and eigenfunction shape descriptors.

The operator is assembled with cotangent weights and a lumped (barycentric)
vertex-area mass matrix; eigenpairs come from the generalized symmetric
problem stiffness*v = lambda*mass*v. Descriptors take the absolute value
of each eigenfunction (killing the sign ambiguity) scaled by 1/sqrt(lambda).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputDataError
from .mesh import MultiFieldMesh

__all__ = [
    "LaplaceOperator",
    "EigenDescriptorSet",
    "cotangent_laplacian",
    "solve_eigen",
    "descriptors",
    "descriptors_to_csv",
    "descriptors_from_csv",
]

_DENSE_LIMIT = 600


@dataclass(frozen=True)
class LaplaceOperator:
    """Stiffness matrix (symmetric, zero row sums) and diagonal mass."""

    stiffness: sp.csr_matrix
    mass: np.ndarray  # diagonal entries, all positive

    @property
    def size(self) -> int:
        return self.mass.shape[0]

    def mass_matrix(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    def apply(self, f: np.ndarray) -> np.ndarray:
        """L f = S^-1 M f, the pointwise Laplacian."""
        return (self.stiffness @ f) / self.mass


@dataclass(frozen=True)
class EigenDescriptorSet:
    """Eigenpairs of the LB operator, plus optional normalized descriptors.

    ``eigenvalues`` are nondecreasing with lambda_0 ~ 0; ``eigenvectors``
    is (n, k) column-wise and S-orthonormal. ``descriptors`` (n, E) holds
    |phi_i| / sqrt(lambda_i) for i = 1..E once :func:`descriptors` ran.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    descriptors: np.ndarray | None = None


def cotangent_laplacian(
    mesh: MultiFieldMesh, clamp_negative: bool = False
) -> LaplaceOperator:
    """Assemble the cotangent-weight operator of a triangle surface.

    Interior edges get (cot a + cot b)/2, boundary edges the single
    cotangent halved. Vertex areas are one third of the incident triangle
    areas (always positive, unlike the exact Voronoi cell on obtuse
    triangles). ``clamp_negative`` zeroes negative cotangent weights.
    """
    if mesh.simplex_dim != 2:
        raise InputDataError("cotangent Laplacian requires a triangle mesh")
    tris = mesh.simplices
    verts = mesh.vertices
    v0, v1, v2 = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    cross = np.cross(v1 - v0, v2 - v0)
    double_area = np.linalg.norm(cross, axis=1)
    area_scale = double_area.max() if len(double_area) else 0.0
    degenerate = np.nonzero(double_area <= 1e-14 * max(area_scale, 1e-300))[0]
    if degenerate.size:
        raise InputDataError(
            f"degenerate (zero-area) triangle at simplex index {int(degenerate[0])}"
        )

    n = mesh.vertex_count
    edge_count: dict[tuple[int, int], int] = {}
    rows, cols, vals = [], [], []
    corners = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    for t, tri in enumerate(tris):
        p = verts[tri]
        for a, b, c in corners:
            # cotangent at corner c, opposite edge (a, b)
            u = p[a] - p[c]
            w = p[b] - p[c]
            cot = float(np.dot(u, w)) / float(double_area[t])
            i, j = int(tri[a]), int(tri[b])
            key = (min(i, j), max(i, j))
            edge_count[key] = edge_count.get(key, 0) + 1
            if edge_count[key] > 2:
                raise InputDataError(
                    f"non-manifold edge {key}: more than two incident triangles"
                )
            weight = 0.5 * cot
            if clamp_negative:
                weight = max(weight, 0.0)
            rows.extend([i, j])
            cols.extend([j, i])
            vals.extend([-weight, -weight])

    m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(m.sum(axis=1)).ravel()
    m = m + sp.diags(diag)

    areas = double_area / 2.0
    s = np.zeros(n)
    for k in range(3):
        np.add.at(s, tris[:, k], areas / 3.0)
    if (s <= 0).any():
        bad = int(np.nonzero(s <= 0)[0][0])
        raise InputDataError(f"vertex {bad} has no incident triangle area")
    return LaplaceOperator(stiffness=m.tocsr(), mass=s)


def _ordered(vals: np.ndarray, vecs: np.ndarray, mass: np.ndarray):
    """Sort eigenpairs, S-normalize, fix signs, break eigenvalue ties.

    Ties are ordered by lexicographic comparison of the absolute-value
    vectors so repeated eigenvalues get a deterministic order.
    """
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, mass[:, None] * vecs))
    vecs = vecs / norms
    for j in range(vecs.shape[1]):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    scale = max(abs(float(vals[-1])), 1.0)
    start = 0
    while start < len(vals):
        stop = start + 1
        while stop < len(vals) and vals[stop] - vals[start] <= 1e-8 * scale:
            stop += 1
        if stop - start > 1:
            block = sorted(
                range(start, stop), key=lambda j: tuple(np.abs(vecs[:, j]))
            )
            vals[start:stop] = vals[block]
            vecs[:, start:stop] = vecs[:, block]
        start = stop
    return vals, vecs


def solve_eigen(op: LaplaceOperator, k: int) -> EigenDescriptorSet:
    """k+1 smallest eigenpairs of stiffness*v = lambda*mass*v.

    Dense symmetric-definite solve at small sizes, shift-inverted Lanczos
    above (deterministic start vector). The first eigenvalue of every
    connected mesh is zero with a constant eigenvector.
    """
    n = op.size
    if k >= n:
        raise InputDataError(f"requested {k + 1} eigenpairs of an order-{n} operator")
    want = k + 1
    if n <= _DENSE_LIMIT or want >= n - 1:
        dense = op.stiffness.toarray()
        vals, vecs = scipy.linalg.eigh(
            dense, np.diag(op.mass), subset_by_index=[0, k]
        )
    else:
        sigma = -0.01 * float(op.stiffness.diagonal().sum() / op.mass.sum())
        sigma = min(sigma, -1e-8)
        v0 = np.random.default_rng(0).standard_normal(n)
        try:
            vals, vecs = spla.eigsh(
                op.stiffness,
                k=want,
                M=op.mass_matrix().tocsc(),
                sigma=sigma,
                which="LM",
                v0=v0,
            )
        except spla.ArpackNoConvergence as exc:
            if n > 5000:
                residual = getattr(exc, "eigenvalues", None)
                raise InputDataError(
                    f"eigensolver failed to converge on n={n}: {exc} "
                    f"(partial spectrum: {residual})"
                ) from exc
            dense = op.stiffness.toarray()
            vals, vecs = scipy.linalg.eigh(
                dense, np.diag(op.mass), subset_by_index=[0, k]
            )
    vals, vecs = _ordered(np.asarray(vals, dtype=np.float64), np.asarray(vecs), op.mass)
    return EigenDescriptorSet(eigenvalues=vals, eigenvectors=vecs)


def descriptors(eig: EigenDescriptorSet, count: int) -> EigenDescriptorSet:
    """Normalized absolute eigenfunction descriptors |phi_i| / sqrt(lambda_i).

    Uses eigenpairs 1..count (skipping the constant pair) and is invariant
    under any sign flip of the eigenvectors by construction.
    """
    avail = len(eig.eigenvalues) - 1
    if count < 1 or count > avail:
        raise InputDataError(
            f"requested {count} descriptors, only {avail} nonzero eigenpairs available"
        )
    lam = eig.eigenvalues[1 : count + 1]
    scale = max(abs(float(eig.eigenvalues[-1])), 1.0)
    if (lam <= 1e-12 * scale).any():
        raise InputDataError(
            "non-positive eigenvalue among descriptors: the surface is "
            "disconnected or the operator is broken"
        )
    mat = np.abs(eig.eigenvectors[:, 1 : count + 1]) / np.sqrt(lam)[None, :]
    return EigenDescriptorSet(
        eigenvalues=eig.eigenvalues,
        eigenvectors=eig.eigenvectors,
        descriptors=mat,
    )


def descriptors_to_csv(eig: EigenDescriptorSet) -> str:
    """CSV export: header row carries the eigenvalues, one row per vertex."""
    if eig.descriptors is None:
        raise InputDataError("descriptor set is raw; call descriptors() first")
    count = eig.descriptors.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([repr(float(v)) for v in eig.eigenvalues[1 : count + 1]])
    for row in eig.descriptors:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def descriptors_from_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`descriptors_to_csv`; also reads externally
    computed per-vertex descriptor tables of the same shape."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise InputDataError("descriptor CSV needs a header and at least one vertex")
    try:
        lams = np.array([float(v) for v in rows[0]], dtype=np.float64)
        mat = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise InputDataError(f"bad descriptor CSV: {exc}") from exc
    if mat.shape[1] != lams.shape[0]:
        raise InputDataError("descriptor CSV rows do not match the header width")
    return lams, mat
