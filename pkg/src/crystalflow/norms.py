"""Norms on R^N used as surface tensions and mobilities.

A norm here is an even, convex, one-homogeneous gauge eta with eta(x) > 0 for
x != 0.  Four concrete kinds are provided:

* ``EuclideanNorm``   -- eta(x) = sqrt(x^T Q x) for a positive definite Q,
* ``PNorm``           -- the l^p norms, 1 <= p <= inf,
* ``CrystallineNorm`` -- facet form eta(x) = max_i <p_i, x> for a symmetric
  finite direction set (the polar unit ball is conv{p_i}),
* ``SumNorm``         -- nonnegative combinations w_1*eta_1 + w_2*eta_2 + ...

Every kind exposes evaluation, the polar norm eta°(xi) = sup{<v,xi> : eta(v)<=1},
a subgradient selection, and Euclidean projection of vector fields onto the
polar unit ball {eta° <= 1} (used by the variational solver).  Polars are exact
for the first three kinds; sum kinds fall back to a support-function supremum
over a fine direction mesh with a certified bracket.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .errors import ConfigError, InputError, NumericalError

# Direction-mesh resolution used for sum-kind polars and generic ellipticity
# sampling: 2^14 angles in 2D, icosphere level 5 in 3D.
MESH_SIZE_2D = 2**14
ICOSPHERE_LEVEL = 3  # level 3 has 642 vertices; refined on demand up to 5


def _as_vector(v, dim):
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise InputError(f"expected a vector of dimension {dim}, got shape {v.shape}")
    return v


def _check_field(vecs, dim):
    vecs = np.asarray(vecs, dtype=float)
    if vecs.ndim < 1 or vecs.shape[0] != dim:
        raise InputError(f"vector field must have leading axis of length {dim}")
    return vecs


@lru_cache(maxsize=8)
def direction_mesh(dim: int, size: int = 0) -> np.ndarray:
    """Unit direction samples, shape (m, dim).

    2D: equally spaced angles.  3D: subdivided icosahedron.  Higher dimensions
    use a seeded Gaussian sample (diagnostic quality only).
    """
    if dim == 2:
        m = size or MESH_SIZE_2D
        ang = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        level = size or ICOSPHERE_LEVEL
        return _icosphere(level)
    rng = np.random.default_rng(20240517)
    m = size or 4096
    pts = rng.standard_normal((m, dim))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _icosphere(level: int) -> np.ndarray:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]

    def midpoint(cache, i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    for _ in range(level):
        cache: dict = {}
        new_faces = []
        for (a, b, c) in faces:
            ab = midpoint(cache, a, b)
            bc = midpoint(cache, b, c)
            ca = midpoint(cache, c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.asarray(verts)


def _mesh_gap(dim: int, mesh: np.ndarray) -> float:
    """Upper bound on the Euclidean distance from any unit vector to the mesh."""
    if dim == 2:
        return float(2.0 * np.sin(np.pi / len(mesh)))
    # nearest-neighbour spacing on a subsample, doubled for safety
    sub = mesh[:: max(1, len(mesh) // 512)]
    d2 = np.sum((sub[:, None, :] - mesh[None, :, :]) ** 2, axis=-1)
    d2[d2 < 1e-20] = np.inf
    return float(2.0 * np.sqrt(d2.min(axis=1).max()))


class Norm:
    """Base class: an even convex one-homogeneous gauge on R^dim."""

    kind = "abstract"

    def __init__(self, dim: int):
        if int(dim) < 2:
            raise ConfigError("norms require dimension >= 2")
        self.dim = int(dim)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, v) -> float:
        return float(self.eval_field(_as_vector(v, self.dim)[:, None])[0])

    def eval_field(self, vecs: np.ndarray) -> np.ndarray:
        """eta applied along axis 0 of an (dim, ...) array."""
        raise NotImplementedError

    # -- polar --------------------------------------------------------------
    def polar_value(self, v) -> float:
        return float(self.polar_field(_as_vector(v, self.dim)[:, None])[0])

    def polar_field(self, vecs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def polar(self) -> "Norm":
        """The polar norm as a Norm object (exact where a closed form exists)."""
        raise NotImplementedError

    def polar_bracket(self, v) -> tuple[float, float]:
        """Certified (lower, upper) bracket for eta°(v); tight for exact kinds."""
        val = self.polar_value(v)
        return (val, val)

    # -- subgradient --------------------------------------------------------
    def subgradient(self, v) -> np.ndarray:
        """One element of the subdifferential of eta at v.

        For v != 0 the returned xi satisfies eta°(xi) = 1 and <xi, v> = eta(v);
        at v = 0 the zero vector is returned.
        """
        raise NotImplementedError

    def subgradient_field(self, vecs: np.ndarray) -> np.ndarray:
        """Columnwise subgradient selection for an (dim, ...) array.

        Generic fallback loops over cells; concrete kinds override with
        vectorized selections."""
        vecs = _check_field(vecs, self.dim)
        flat = vecs.reshape(self.dim, -1)
        out = np.empty_like(flat)
        for i in range(flat.shape[1]):
            out[:, i] = self.subgradient(flat[:, i])
        return out.reshape(vecs.shape)

    # -- polar-ball projection ----------------------------------------------
    def project_polar_ball_field(self, vecs: np.ndarray) -> np.ndarray:
        """Euclidean projection of each column vector onto {eta° <= 1}."""
        raise NotImplementedError

    # -- misc ----------------------------------------------------------------
    def spec(self) -> dict:
        raise NotImplementedError

    def _spec_json(self) -> str:
        cached = getattr(self, "_spec_json_cache", None)
        if cached is None:
            cached = json.dumps(self.spec(), sort_keys=True)
            self._spec_json_cache = cached
        return cached

    def __repr__(self):
        return f"{type(self).__name__}({json.dumps(self.spec())})"

    def __eq__(self, other):
        return isinstance(other, Norm) and self._spec_json() == other._spec_json()

    def __hash__(self):
        cached = getattr(self, "_hash_cache", None)
        if cached is None:
            cached = hash(self._spec_json())
            self._hash_cache = cached
        return cached


class EuclideanNorm(Norm):
    """eta(x) = sqrt(x^T Q x); the plain Euclidean norm when Q = I."""

    kind = "euclidean"

    def __init__(self, dim: int, matrix=None, scale: float = 1.0):
        super().__init__(dim)
        if matrix is None:
            matrix = np.eye(dim) * float(scale) ** 2
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (dim, dim):
            raise ConfigError("quadratic form has wrong shape")
        self.matrix = 0.5 * (self.matrix + self.matrix.T)
        w, vec = np.linalg.eigh(self.matrix)
        if w.min() <= 0:
            raise ConfigError("quadratic form must be positive definite")
        self._eigvals = w
        self._eigvecs = vec
        self._inv = vec @ np.diag(1.0 / w) @ vec.T

    @property
    def is_isotropic(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix[0, 0] * np.eye(self.dim)))

    def eval_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        q = np.einsum("i...,ij,j...->...", vecs, self.matrix, vecs)
        return np.sqrt(np.maximum(q, 0.0))

    def polar_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        q = np.einsum("i...,ij,j...->...", vecs, self._inv, vecs)
        return np.sqrt(np.maximum(q, 0.0))

    def polar(self):
        return EuclideanNorm(self.dim, matrix=self._inv)

    def subgradient(self, v):
        v = _as_vector(v, self.dim)
        n = self(v)
        if n == 0.0:
            return np.zeros(self.dim)
        return self.matrix @ v / n

    def subgradient_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        n = self.eval_field(vecs)
        qv = np.tensordot(self.matrix, vecs, axes=(1, 0))
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(n > 0.0, qv / n, 0.0)
        return out

    def project_polar_ball_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        if self.is_isotropic:
            # polar ball is the Euclidean ball of radius sqrt(q) with q = Q[0,0]
            r = math.sqrt(self.matrix[0, 0])
            nrm = np.sqrt(np.sum(vecs * vecs, axis=0))
            fac = np.minimum(1.0, r / np.maximum(nrm, 1e-300))
            return vecs * fac
        return _project_ellipsoid(vecs, self._eigvals, self._eigvecs)

    def spec(self):
        if self.is_isotropic and abs(self.matrix[0, 0] - 1.0) < 1e-14:
            return {"kind": "l2", "dim": self.dim}
        return {"kind": "euclidean", "dim": self.dim, "matrix": self.matrix.tolist()}


def _project_ellipsoid(vecs, eigvals, eigvecs):
    """Project columns of (dim, ...) onto {x : x^T Q^{-1} x <= 1}, Q = V diag(w) V^T.

    In eigen-coordinates the ball is sum(y_i^2 / w_i) <= 1; the projection solves
    y_i = u_i / (1 + lam / w_i) with the multiplier lam found per point by Newton.
    """
    shape = vecs.shape
    u = np.tensordot(eigvecs.T, vecs, axes=1).reshape(shape[0], -1)
    g = np.sum(u * u / eigvals[:, None], axis=0)
    outside = g > 1.0
    y = u.copy()
    if np.any(outside):
        uo = u[:, outside]
        lam = np.zeros(uo.shape[1])
        w = eigvals[:, None]
        for _ in range(80):
            denom = (1.0 + lam[None, :] / w) ** 2
            phi = np.sum(uo * uo / (w * denom), axis=0) - 1.0
            dphi = -2.0 * np.sum(uo * uo / (w * w * denom * (1.0 + lam[None, :] / w)), axis=0)
            step = phi / dphi
            lam = np.maximum(lam - step, 0.0)
            if np.max(np.abs(phi)) < 1e-14:
                break
        y[:, outside] = uo / (1.0 + lam[None, :] / w)
    out = np.tensordot(eigvecs, y, axes=1)
    return out.reshape(shape)


class PNorm(Norm):
    """The l^p norm, 1 <= p <= inf."""

    kind = "lp"

    def __init__(self, dim: int, p: float):
        super().__init__(dim)
        p = float(p)
        if not (p >= 1.0):
            raise ConfigError("p must satisfy p >= 1")
        self.p = p

    @property
    def q(self) -> float:
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    def eval_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        return _lp(vecs, self.p)

    def polar_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        return _lp(vecs, self.q)

    def polar(self):
        return PNorm(self.dim, self.q)

    def subgradient(self, v):
        v = _as_vector(v, self.dim)
        if not np.any(v):
            return np.zeros(self.dim)
        if self.p == 1.0:
            return np.sign(v)
        if math.isinf(self.p):
            i = int(np.argmax(np.abs(v)))  # lowest index among maxima
            xi = np.zeros(self.dim)
            xi[i] = math.copysign(1.0, v[i])
            return xi
        n = self(v)
        return np.sign(v) * (np.abs(v) / n) ** (self.p - 1.0)

    def subgradient_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        if self.p == 1.0:
            return np.sign(vecs)
        if math.isinf(self.p):
            a = np.abs(vecs)
            idx = np.argmax(a, axis=0)
            out = np.zeros_like(vecs)
            grid_idx = np.indices(vecs.shape[1:])
            out[(idx,) + tuple(grid_idx)] = np.sign(
                np.take_along_axis(vecs, idx[None], axis=0)[0]
            )
            out[(slice(None),) + np.nonzero(~np.any(vecs, axis=0))] = 0.0
            return out
        n = self.eval_field(vecs)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(n > 0.0, np.sign(vecs) * (np.abs(vecs) / n) ** (self.p - 1.0), 0.0)
        return out

    def project_polar_ball_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        q = self.q
        if math.isinf(q):
            return np.clip(vecs, -1.0, 1.0)
        if q == 2.0:
            nrm = np.sqrt(np.sum(vecs * vecs, axis=0))
            return vecs * np.minimum(1.0, 1.0 / np.maximum(nrm, 1e-300))
        if q == 1.0:
            return _project_l1_ball(vecs)
        return _project_lq_ball(vecs, q)

    def spec(self):
        if self.p == 1.0:
            return {"kind": "l1", "dim": self.dim}
        if self.p == 2.0:
            return {"kind": "l2", "dim": self.dim}
        if math.isinf(self.p):
            return {"kind": "linf", "dim": self.dim}
        return {"kind": "lp", "dim": self.dim, "p": self.p}


def _lp(vecs, p):
    if math.isinf(p):
        return np.max(np.abs(vecs), axis=0)
    if p == 1.0:
        return np.sum(np.abs(vecs), axis=0)
    if p == 2.0:
        return np.sqrt(np.sum(vecs * vecs, axis=0))
    return np.sum(np.abs(vecs) ** p, axis=0) ** (1.0 / p)


def _project_l1_ball(vecs):
    """Columnwise Euclidean projection onto the l1 unit ball (sort method)."""
    shape = vecs.shape
    w = vecs.reshape(shape[0], -1)
    a = np.abs(w)
    inside = a.sum(axis=0) <= 1.0
    out = w.copy()
    if not np.all(inside):
        cols = ~inside
        ac = a[:, cols]
        s = -np.sort(-ac, axis=0)
        css = np.cumsum(s, axis=0) - 1.0
        idx = np.arange(1, shape[0] + 1)[:, None]
        cond = s - css / idx > 0
        rho = shape[0] - 1 - np.argmax(cond[::-1], axis=0)
        theta = np.take_along_axis(css, rho[None, :], axis=0)[0] / (rho + 1.0)
        out[:, cols] = np.sign(w[:, cols]) * np.maximum(ac - theta[None, :], 0.0)
    return out.reshape(shape)


def _project_lq_ball(vecs, q):
    """Columnwise projection onto {||x||_q <= 1} for 1 < q < inf by bisection.

    For points outside the ball the projection satisfies
    x_i = sign(w_i) * t_i with t_i + lam*q*t_i^(q-1) = |w_i|; ||x||_q is
    decreasing in lam, so lam is bracketed and bisected, with the inner
    componentwise equation solved by Newton.
    """
    shape = vecs.shape
    w = vecs.reshape(shape[0], -1)
    a = np.abs(w)
    nrm = _lp(a, q)
    outside = nrm > 1.0
    out = w.copy()
    if np.any(outside):
        ac = a[:, outside]

        def shrink(lam):
            # componentwise Newton on t + lam*q*t^(q-1) = |w|, t in [0, |w|]
            lam = lam[None, :]
            t = np.minimum(ac, 1.0)
            for _ in range(60):
                ts = np.maximum(t, 1e-300)
                f = t + lam * q * ts ** (q - 1.0) - ac
                df = 1.0 + lam * q * (q - 1.0) * ts ** (q - 2.0)
                t = np.clip(t - f / df, 0.0, ac)
            return t

        lo = np.zeros(ac.shape[1])
        hi = np.ones(ac.shape[1])
        for _ in range(200):  # grow hi until every column's norm dips below 1
            if np.all(_lp(shrink(hi), q) <= 1.0):
                break
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            high = _lp(shrink(mid), q) > 1.0
            lo = np.where(high, mid, lo)
            hi = np.where(high, hi, mid)
        out[:, outside] = np.sign(w[:, outside]) * shrink(hi)
    return out.reshape(shape)


class CrystallineNorm(Norm):
    """Facet form eta(x) = max_i <p_i, x> over a symmetric direction list.

    Equivalently the polar unit ball {eta° <= 1} is conv{p_i}.
    """

    kind = "crystalline"

    def __init__(self, facets):
        facets = np.asarray(facets, dtype=float)
        if facets.ndim != 2:
            raise ConfigError("facets must be a list of vectors")
        super().__init__(facets.shape[1])
        if np.linalg.matrix_rank(facets) < self.dim:
            raise ConfigError("facet directions must span R^N")
        # symmetry under negation
        for p in facets:
            if np.min(np.linalg.norm(facets + p[None, :], axis=1)) > 1e-9 * max(1.0, np.linalg.norm(p)):
                raise ConfigError("facet list must be symmetric under negation")
        self.facets = facets
        self._hull_normals = None
        self._hull_offsets = None

    def _hull(self):
        if self._hull_normals is None:
            hull = ConvexHull(self.facets)
            eq = hull.equations  # n.x + b <= 0
            normals = eq[:, :-1]
            offsets = -eq[:, -1]
            if np.any(offsets <= 1e-12):
                raise ConfigError("facet hull must contain the origin in its interior")
            self._hull_normals = normals / offsets[:, None]
            self._hull_offsets = np.ones(len(offsets))
            self._hull_vertices = self.facets[hull.vertices]
        return self._hull_normals

    def eval_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        return np.max(np.tensordot(self.facets, vecs, axes=(1, 0)), axis=0)

    def polar_field(self, vecs):
        # gauge of conv{p_i} via the hull half-space representation
        normals = self._hull()
        vecs = _check_field(vecs, self.dim)
        return np.max(np.tensordot(normals, vecs, axes=(1, 0)), axis=0)

    def polar_value_lp(self, v) -> float:
        """Gauge of conv{p_i} as the optimal value of
        min{sum t_i : v = sum t_i p_i, t >= 0}."""
        v = _as_vector(v, self.dim)
        m = len(self.facets)
        res = linprog(
            c=np.ones(m),
            A_eq=self.facets.T,
            b_eq=v,
            bounds=[(0, None)] * m,
            method="highs",
        )
        if not res.success:
            raise NumericalError(f"gauge linear program infeasible for v={v}")
        return float(res.fun)

    def polar_value(self, v):
        return self.polar_value_lp(v)

    def polar(self):
        self._hull()
        return CrystallineNorm(self._hull_normals)

    def vertices(self) -> np.ndarray:
        """Extreme points of the polar unit ball conv{p_i}."""
        self._hull()
        return self._hull_vertices

    def subgradient(self, v):
        v = _as_vector(v, self.dim)
        if not np.any(v):
            return np.zeros(self.dim)
        i = int(np.argmax(self.facets @ v))  # lowest maximizing index
        return self.facets[i].copy()

    def subgradient_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        dots = np.tensordot(self.facets, vecs, axes=(1, 0))
        idx = np.argmax(dots, axis=0)
        out = np.moveaxis(self.facets[idx], -1, 0)
        out[(slice(None),) + np.nonzero(~np.any(vecs, axis=0))] = 0.0
        return out

    def _box_halfwidths(self):
        """If the polar ball is an axis-aligned box, its half-widths, else None."""
        normals = self._hull()
        half = np.full(self.dim, np.nan)
        for n_vec in normals:
            ax = int(np.argmax(np.abs(n_vec)))
            off_axis = np.abs(n_vec).sum() - abs(n_vec[ax])
            if off_axis > 1e-12 * abs(n_vec[ax]):
                return None
            half[ax] = 1.0 / abs(n_vec[ax])
        if np.any(np.isnan(half)):
            return None
        return half

    def project_polar_ball_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        half = self._box_halfwidths()
        if half is not None:
            shape = (self.dim,) + (1,) * (vecs.ndim - 1)
            h = half.reshape(shape)
            return np.clip(vecs, -h, h)
        return _project_polytope_dykstra(vecs, self._hull(), tol=1e-12)

    def spec(self):
        return {"kind": "crystalline", "dim": self.dim, "facets": self.facets.tolist()}


def _project_polytope_dykstra(vecs, normals, tol=1e-12, max_cycles=300):
    """Dykstra's alternating projections onto {x : <n_j, x> <= 1 for all j}.

    Cycles through the half-spaces with the usual correction terms; converges
    to the exact Euclidean projection onto the intersection.
    """
    shape = vecs.shape
    x = vecs.reshape(shape[0], -1).copy()
    m = x.shape[1]
    k = len(normals)
    corr = np.zeros((k, shape[0], m))
    nn = np.sum(normals * normals, axis=1)
    for _ in range(max_cycles):
        moved = 0.0
        for j in range(k):
            y = x + corr[j]
            viol = (normals[j] @ y) - 1.0
            step = np.maximum(viol, 0.0) / nn[j]
            xn = y - normals[j][:, None] * step[None, :]
            corr[j] = y - xn
            moved = max(moved, float(np.max(np.abs(xn - x))) if m else 0.0)
            x = xn
        if moved < tol:
            break
    return x.reshape(shape)


class SumNorm(Norm):
    """Pointwise nonnegative combination of norms: eta = sum_j w_j * eta_j."""

    kind = "sum"

    def __init__(self, terms):
        terms = [(float(w), n) for (w, n) in terms]
        if not terms:
            raise ConfigError("sum norm needs at least one term")
        dim = terms[0][1].dim
        for w, n in terms:
            if w < 0:
                raise ConfigError("sum norm weights must be nonnegative")
            if n.dim != dim:
                raise ConfigError("sum norm terms must share the dimension")
        if sum(w for w, _ in terms) <= 0:
            raise ConfigError("sum norm must have a positive total weight")
        super().__init__(dim)
        self.terms = [(w, n) for (w, n) in terms if w > 0]

    def eval_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        out = self.terms[0][0] * self.terms[0][1].eval_field(vecs)
        for w, n in self.terms[1:]:
            out = out + w * n.eval_field(vecs)
        return out

    # The polar of a sum has no closed form; use the support-function
    # supremum eta°(xi) = max_v <xi, v>/eta(v) over a direction mesh.
    def _mesh(self):
        mesh = direction_mesh(self.dim)
        vals = self.eval_field(mesh.T)
        return mesh, vals

    def polar_field(self, vecs):
        if len(self.terms) == 1:
            w, n = self.terms[0]
            return n.polar_field(vecs) / w
        vecs = _check_field(vecs, self.dim)
        mesh, vals = self._mesh()
        flat = vecs.reshape(self.dim, -1)
        out = np.empty(flat.shape[1])
        chunk = max(1, 2**22 // max(1, len(mesh)))
        for i in range(0, flat.shape[1], chunk):
            dots = mesh @ flat[:, i : i + chunk]
            out[i : i + chunk] = np.max(dots / vals[:, None], axis=0)
        return out.reshape(vecs.shape[1:])

    def polar_bracket(self, v):
        lo = self.polar_value(v)
        if len(self.terms) == 1:
            return (lo, lo)
        mesh, vals = self._mesh()
        gap = _mesh_gap(self.dim, mesh)
        m_hi = float(vals.max()) / max(1e-300, 1.0 - gap)  # bound on max eta on sphere
        m_lo = max(1e-300, float(vals.min()) - gap * m_hi)  # bound on min eta on sphere
        vnorm = float(np.linalg.norm(np.asarray(v, dtype=float)))
        hi = (lo + gap * vnorm / m_lo) / max(1e-300, 1.0 - gap * m_hi / m_lo)
        return (lo, hi)

    def polar(self):
        """Polar norm; exact for single-term sums, else a facet-form
        approximant from the support mesh.

        The approximant's unit ball is inscribed in the true polar ball with
        relative defect O(gap^2) on smooth arcs and zero on flat facets
        (support points on a facet are collinear), so it is accurate to
        ~1e-6 for regularized mobilities at the default resolution.
        """
        if len(self.terms) == 1:
            w, n = self.terms[0]
            return SumNorm([(1.0 / w, n.polar())])
        mesh, vals = self._mesh()
        step = max(1, len(mesh) // 2048)
        return CrystallineNorm(mesh[::step] / vals[::step, None])

    def subgradient(self, v):
        v = _as_vector(v, self.dim)
        out = np.zeros(self.dim)
        for w, n in self.terms:
            out += w * n.subgradient(v)
        return out

    def subgradient_field(self, vecs):
        vecs = _check_field(vecs, self.dim)
        out = self.terms[0][0] * self.terms[0][1].subgradient_field(vecs)
        for w, n in self.terms[1:]:
            out = out + w * n.subgradient_field(vecs)
        return out

    def project_polar_ball_field(self, vecs):
        if len(self.terms) == 1:
            w, n = self.terms[0]
            return n.project_polar_ball_field(vecs * w) / w
        raise InputError(
            "Euclidean projection onto the polar ball of a genuine sum norm is not "
            "supported; sum norms arise as mobilities, which are never projected"
        )

    def spec(self):
        return {
            "kind": "sum",
            "dim": self.dim,
            "terms": [{"weight": w, "norm": n.spec()} for w, n in self.terms],
        }


# ---------------------------------------------------------------------------
# Wulff shapes
# ---------------------------------------------------------------------------

class WulffShape:
    """The set {y : eta°(y - center) <= radius}."""

    def __init__(self, norm: Norm, center, radius: float):
        self.norm = norm
        self.center = np.asarray(center, dtype=float)
        if self.center.shape != (norm.dim,):
            raise InputError("center dimension mismatch")
        if radius <= 0:
            raise InputError("radius must be positive")
        self.radius = float(radius)

    def membership(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for points stacked along axis 0 as (dim, ...)."""
        pts = _check_field(points, self.norm.dim)
        off = pts - self.center.reshape((self.norm.dim,) + (1,) * (pts.ndim - 1))
        return self.norm.polar_field(off) <= self.radius


# ---------------------------------------------------------------------------
# Free-function interface
# ---------------------------------------------------------------------------

def eval_norm(n: Norm, v) -> float:
    """eta(v)."""
    return n(v)


def polar_eval(n: Norm, v) -> float:
    """eta°(v) = sup{<u, v> : eta(u) <= 1}."""
    return n.polar_value(v)


def subgradient_select(n: Norm, v) -> np.ndarray:
    """A deterministic element of the subdifferential of eta at v."""
    return n.subgradient(v)


def regularize_mobility(psi: Norm, delta: float, phi: Norm) -> Norm:
    """psi + delta*phi; for delta > 0 the result has an interior tangent
    phi-Wulff shape of radius delta at every boundary point of its Wulff shape."""
    if delta < 0:
        raise InputError("delta must be nonnegative")
    if delta == 0:
        return psi
    if psi.dim != phi.dim:
        raise InputError("dimension mismatch between mobility and anisotropy")
    return SumNorm([(1.0, psi), (float(delta), phi)])


def ellipticity_constants(a: Norm, b: Norm) -> tuple[float, float]:
    """Certified (c1, c2) with c1 * b°(v) <= a°(v) <= c2 * b°(v) for all v.

    Exact for matching norms, Euclidean/Euclidean pairs, and 2D crystalline
    pairs (ratio extrema sit at polar-ball vertex directions); otherwise a
    dense direction sample with a mesh-gap inflation so the returned bounds
    are guaranteed.
    """
    if a.dim != b.dim:
        raise InputError("dimension mismatch")
    if a.spec() == b.spec():
        return (1.0, 1.0)
    if isinstance(a, EuclideanNorm) and isinstance(b, EuclideanNorm):
        # (a°/b°)^2 extrema are generalized eigenvalues of (A_inv, B_inv)
        from scipy.linalg import eigh

        w = eigh(a._inv, b._inv, eigvals_only=True)
        return (float(np.sqrt(w.min())), float(np.sqrt(w.max())))
    if isinstance(a, CrystallineNorm) and isinstance(b, CrystallineNorm) and a.dim == 2:
        cand = np.vstack([a.vertices(), b.vertices()])
        ra = a.polar_field(cand.T)
        rb = b.polar_field(cand.T)
        ratio = ra / rb
        return (float(ratio.min()), float(ratio.max()))
    mesh = direction_mesh(a.dim)
    cand = mesh
    for n in (a, b):
        if isinstance(n, CrystallineNorm):
            verts = n.vertices()
            cand = np.vstack([cand, verts / np.linalg.norm(verts, axis=1, keepdims=True)])
    ra = a.polar_field(cand.T)
    rb = b.polar_field(cand.T)
    ratio = ra / rb
    gap = _mesh_gap(a.dim, mesh)
    # Lipschitz inflation: on unit vectors u, v with |u-v| <= gap,
    # a°(u) <= a°(v) + gap*max(a°) and b°(u) >= b°(v) - gap*max(b°).
    infl_a = gap * float(ra.max()) / float(ra.min())
    infl_b = gap * float(rb.max()) / float(rb.min())
    c1 = float(ratio.min()) * (1.0 - infl_a) / (1.0 + infl_b)
    c2 = float(ratio.max()) * (1.0 + infl_a) / (1.0 - infl_b)
    return (c1, c2)


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

def norm_from_spec(spec: dict, dim: int | None = None) -> Norm:
    """Build a Norm from its JSON description.

    Accepted kinds: l1, linf, l2, lp, euclidean, crystalline, sum.  ``dim`` is
    required for the scalar kinds unless present in the spec itself.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("norm spec must be an object with a 'kind' field")
    kind = spec["kind"]
    d = spec.get("dim", dim)
    if kind == "crystalline":
        if "facets" not in spec:
            raise ConfigError("crystalline norm spec needs 'facets'")
        return CrystallineNorm(spec["facets"])
    if kind == "sum":
        terms = spec.get("terms")
        if not terms:
            raise ConfigError("sum norm spec needs 'terms'")
        return SumNorm([(t["weight"], norm_from_spec(t["norm"], d)) for t in terms])
    if d is None:
        raise ConfigError(f"norm kind '{kind}' needs a dimension")
    d = int(d)
    if kind == "l1":
        return PNorm(d, 1.0)
    if kind == "linf":
        return PNorm(d, math.inf)
    if kind == "l2":
        return EuclideanNorm(d)
    if kind == "lp":
        if "p" not in spec:
            raise ConfigError("lp norm spec needs 'p'")
        return PNorm(d, spec["p"])
    if kind == "euclidean":
        return EuclideanNorm(d, matrix=spec.get("matrix"), scale=spec.get("scale", 1.0))
    raise ConfigError(f"unknown norm kind '{kind}'")


def l1_facets(dim: int) -> np.ndarray:
    """Facet directions {(+-1, ..., +-1)} whose facet form is the l1 norm."""
    corners = np.array(np.meshgrid(*([[-1.0, 1.0]] * dim))).reshape(dim, -1).T
    return corners


def crystalline_l1(dim: int = 2) -> CrystallineNorm:
    """The l1 norm in facet form; its Wulff shape is the axis-aligned cube."""
    return CrystallineNorm(l1_facets(dim))


def hexagonal_norm() -> CrystallineNorm:
    """A regular hexagonal crystalline norm in 2D."""
    ang = np.arange(6) * np.pi / 3.0
    return CrystallineNorm(np.stack([np.cos(ang), np.sin(ang)], axis=1))
