"""Chart-based tensor fields with derivative access.

Fields are backed either by closed-form expressions (exact forward-mode
derivatives) or by derived closures (central finite differences, step
6e-6 * (1 + |x_k|) per coordinate).  Operator fields built from exact
matrix calculus can also carry an explicit jacobian closure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprdsl
from .errors import DegenerateMetric, DimensionCap
from .smallmat import DIM_CAP

EPS_DEG = 1e-10
FD_STEP = 6e-6


# ---------------------------------------------------------------------------
# charts and deterministic sampling


@dataclass(frozen=True)
class Chart:
    """Coordinate box with a distinguished base point."""

    dim: int
    box: tuple
    base_point: tuple

    def __post_init__(self):
        if self.dim < 1 or self.dim > DIM_CAP:
            raise DimensionCap(f"chart dimension {self.dim} outside 1..{DIM_CAP}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        base = tuple(float(x) for x in self.base_point)
        if len(box) != self.dim or len(base) != self.dim:
            raise ValueError("box and base point must match the chart dimension")
        for k, (lo, hi) in enumerate(box):
            if not lo < hi:
                raise ValueError(f"box interval {k} must have lo < hi")
            if not lo <= base[k] <= hi:
                raise ValueError(f"base point coordinate {k} outside the box")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "base_point", base)

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        for k, (lo, hi) in enumerate(self.box):
            if not (lo - margin <= p[k] <= hi + margin):
                return False
        return True

    def product(self, other: "Chart") -> "Chart":
        return Chart(
            self.dim + other.dim,
            self.box + other.box,
            self.base_point + other.base_point,
        )


class SplitMix64:
    """splitmix64 stream; reproducible across platforms."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return self.next_u64() / 2.0**64

    def normal_pair(self):
        # Box-Muller; u1 shifted away from 0
        u1 = (self.next_u64() + 1) / (2.0**64 + 1)
        u2 = self.uniform()
        r = np.sqrt(-2.0 * np.log(u1))
        return r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)


def sample_points(chart: Chart, count: int, seed: int = 42) -> np.ndarray:
    """Deterministic uniform samples in the chart box (splitmix64)."""
    rng = SplitMix64(seed)
    pts = np.empty((count, chart.dim))
    for i in range(count):
        for k, (lo, hi) in enumerate(chart.box):
            pts[i, k] = lo + (hi - lo) * rng.uniform()
    return pts


# ---------------------------------------------------------------------------
# field backings


def _fd_steps(p: np.ndarray) -> np.ndarray:
    return FD_STEP * (1.0 + np.abs(p))


_compile_cache: dict = {}


def _compiled(e, dim):
    key = (e, dim)
    if key not in _compile_cache:
        _compile_cache[key] = exprdsl.compile_dual(e, dim)
    return _compile_cache[key]


class _Backing:
    """Shared machinery: value/derivative for a matrix- or vector-valued
    function of the chart point."""

    def __init__(self, chart, shape, exprs=None, fn=None, jac=None, cache=True):
        self.chart = chart
        self.shape = shape
        self._fn = fn
        self._jac = jac
        self._exprs = exprs
        self._cache = {} if cache else None
        if exprs is not None:
            flat = []
            for row in exprs:
                flat.extend(row if isinstance(row, tuple) else (row,))
            self._compiled = [_compiled(e, chart.dim) for e in flat]

    def value(self, p: np.ndarray) -> np.ndarray:
        if self._exprs is not None:
            out = np.empty(int(np.prod(self.shape)))
            for i, fn in enumerate(self._compiled):
                out[i] = fn(p)[0]
            return out.reshape(self.shape)
        key = p.tobytes() if self._cache is not None else None
        if key is not None and key in self._cache:
            return self._cache[key][0]
        if self._fn is not None:
            val, jac = np.asarray(self._fn(p), dtype=float), None
        else:
            val, jac = self._jac(p)
            val = np.asarray(val, dtype=float)
            jac = np.asarray(jac, dtype=float)
        if key is not None:
            self._cache[key] = (val, jac)
        return val

    def value_and_derivative(self, p: np.ndarray):
        n = self.chart.dim
        if self._exprs is not None:
            flatv = np.empty(int(np.prod(self.shape)))
            flatd = np.empty((n, int(np.prod(self.shape))))
            for i, fn in enumerate(self._compiled):
                res = fn(p)
                flatv[i] = res[0]
                for k in range(n):
                    flatd[k, i] = res[1 + k]
            return flatv.reshape(self.shape), flatd.reshape((n,) + self.shape)
        if self._jac is not None:
            key = p.tobytes() if self._cache is not None else None
            if key is not None and key in self._cache and self._cache[key][1] is not None:
                return self._cache[key]
            val, jac = self._jac(p)
            val = np.asarray(val, dtype=float)
            jac = np.asarray(jac, dtype=float)
            if key is not None:
                self._cache[key] = (val, jac)
            return val, jac
        # central finite differences of the closure
        val = self.value(p)
        steps = _fd_steps(p)
        deriv = np.empty((n,) + self.shape)
        for k in range(n):
            pp = p.copy()
            pm = p.copy()
            pp[k] += steps[k]
            pm[k] -= steps[k]
            deriv[k] = (self.value(pp) - self.value(pm)) / (2.0 * steps[k])
        return val, deriv


# ---------------------------------------------------------------------------
# fields


class MetricField:
    """Symmetric-matrix-valued field with first-derivative access."""

    def __init__(self, chart: Chart, backing: _Backing, exprs_matrix=None):
        self.chart = chart
        self._backing = backing
        self.component_exprs = exprs_matrix  # n x n tuple of Expr, or None

    @classmethod
    def from_exprs(cls, chart: Chart, rows) -> "MetricField":
        """Build from an n x n matrix of expressions (strings or trees).

        The upper triangle is the source of truth; entries are mirrored so
        the field is symmetric by construction.
        """
        n = chart.dim
        parsed = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                e = rows[i][j]
                parsed[i][j] = exprdsl.parse(e, n) if isinstance(e, str) else e
                parsed[j][i] = parsed[i][j]
        exprs = tuple(tuple(row) for row in parsed)
        backing = _Backing(chart, (n, n), exprs=exprs)
        return cls(chart, backing, exprs_matrix=exprs)

    @classmethod
    def from_function(cls, chart: Chart, fn, jac=None, cache=True) -> "MetricField":
        n = chart.dim
        return cls(chart, _Backing(chart, (n, n), fn=fn, jac=jac, cache=cache))

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        v = self._backing.value(p)
        return 0.5 * (v + v.T)

    def derivative(self, p) -> np.ndarray:
        """d[k, i, j] = d g_ij / d x_k."""
        return self.value_and_derivative(p)[1]

    def value_and_derivative(self, p):
        p = np.asarray(p, dtype=float)
        v, d = self._backing.value_and_derivative(p)
        return 0.5 * (v + v.T), 0.5 * (d + np.swapaxes(d, 1, 2))


class OperatorField:
    """(1,1)-tensor field: matrix-valued function of the chart point."""

    def __init__(self, chart: Chart, backing: _Backing, exprs_matrix=None):
        self.chart = chart
        self._backing = backing
        self.component_exprs = exprs_matrix

    @classmethod
    def from_exprs(cls, chart: Chart, rows) -> "OperatorField":
        n = chart.dim
        parsed = tuple(
            tuple(
                exprdsl.parse(e, n) if isinstance(e, str) else e for e in row
            )
            for row in rows
        )
        return cls(chart, _Backing(chart, (n, n), exprs=parsed), exprs_matrix=parsed)

    @classmethod
    def from_function(cls, chart: Chart, fn, jac=None, cache=True) -> "OperatorField":
        n = chart.dim
        return cls(chart, _Backing(chart, (n, n), fn=fn, jac=jac, cache=cache))

    @classmethod
    def constant(cls, chart: Chart, matrix) -> "OperatorField":
        m = np.array(matrix, dtype=float)
        n = chart.dim
        zero = np.zeros((n, n, n))
        return cls.from_function(chart, lambda p: m, jac=lambda p: (m, zero))

    def value(self, p) -> np.ndarray:
        return self._backing.value(np.asarray(p, dtype=float))

    def derivative(self, p) -> np.ndarray:
        """d[k, i, j] = d L^i_j / d x_k."""
        return self.value_and_derivative(p)[1]

    def value_and_derivative(self, p):
        return self._backing.value_and_derivative(np.asarray(p, dtype=float))


class VectorField:
    """Vector field given by component expressions."""

    def __init__(self, chart: Chart, exprs):
        n = chart.dim
        self.chart = chart
        self.component_exprs = tuple(
            exprdsl.parse(e, n) if isinstance(e, str) else e for e in exprs
        )
        if len(self.component_exprs) != n:
            raise ValueError("vector field needs one component per coordinate")
        self._compiled = [_compiled(e, n) for e in self.component_exprs]

    def value(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.array([fn(p)[0] for fn in self._compiled])

    def derivative(self, p) -> np.ndarray:
        """d[k, i] = d v^i / d x_k."""
        p = np.asarray(p, dtype=float)
        n = self.chart.dim
        out = np.empty((n, n))
        for i, fn in enumerate(self._compiled):
            res = fn(p)
            for k in range(n):
                out[k, i] = res[1 + k]
        return out


# ---------------------------------------------------------------------------
# differential operators


def christoffel(g: MetricField, p) -> np.ndarray:
    """Levi-Civita connection coefficients; out[i, j, k] = Gamma^i_{jk}."""
    p = np.asarray(p, dtype=float)
    gv, dg = g.value_and_derivative(p)
    det = np.linalg.det(gv)
    if abs(det) <= EPS_DEG:
        raise DegenerateMetric(f"metric degenerate at {p} (det {det:.3e})", point=p)
    ginv = np.linalg.inv(gv)
    # Gamma^i_{jk} = 1/2 g^{il} (d_j g_{lk} + d_k g_{lj} - d_l g_{jk})
    term = np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
    return 0.5 * np.einsum("il,ljk->ijk", ginv, term)


def covariant_derivative_op(g: MetricField, L: OperatorField, p) -> np.ndarray:
    """Covariant derivative of a (1,1) field; out[i, j, k] = (nabla L)^i_{j,k}
    with k the differentiation index."""
    p = np.asarray(p, dtype=float)
    gamma = christoffel(g, p)
    lv, dl = L.value_and_derivative(p)
    # (nabla_k L)^i_j = d_k L^i_j + Gamma^i_{ks} L^s_j - Gamma^s_{kj} L^i_s
    out = np.einsum("kij->ijk", dl)
    out = out + np.einsum("iks,sj->ijk", gamma, lv)
    out = out - np.einsum("skj,is->ijk", gamma, lv)
    return out


def nijenhuis(L: OperatorField, p) -> np.ndarray:
    """Nijenhuis torsion; out[i, j, k] = N^i_{jk}, antisymmetric in (j, k)."""
    p = np.asarray(p, dtype=float)
    lv, dl = L.value_and_derivative(p)
    # N^i_{jk} = L^s_j d_s L^i_k - L^s_k d_s L^i_j - L^i_s (d_j L^s_k - d_k L^s_j)
    t1 = np.einsum("sj,sik->ijk", lv, dl)
    t2 = np.einsum("sk,sij->ijk", lv, dl)
    curl = np.einsum("jsk->sjk", dl) - np.einsum("ksj->sjk", dl)
    t3 = np.einsum("is,sjk->ijk", lv, curl)
    out = t1 - t2 - t3
    return 0.5 * (out - np.swapaxes(out, 1, 2))


def lie_derivative_metric(v: VectorField, g: MetricField, p) -> np.ndarray:
    """Lie derivative of the metric along v, as a symmetric matrix."""
    p = np.asarray(p, dtype=float)
    gv, dg = g.value_and_derivative(p)
    vv = v.value(p)
    dv = v.derivative(p)
    # (L_v g)_{ij} = v^s d_s g_{ij} + g_{sj} d_i v^s + g_{is} d_j v^s
    out = np.einsum("s,sij->ij", vv, dg)
    out = out + np.einsum("sj,is->ij", gv, dv)
    out = out + np.einsum("is,js->ij", gv, dv)
    return 0.5 * (out + out.T)
