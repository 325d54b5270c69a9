"""Core constructions on metric pairs.

The central object is the (1,1)-tensor attached to a pair of
nondegenerate symmetric forms g, gbar:

    L = (det gbar / det g)^(1/(n+1)) * gbar^{-1} g

together with the first-order compatibility equation

    (nabla_k L)^i_j = 1/2 (delta^i_k l_j + g^{is} l_s g_{kj}),   l = d tr L,

whose vanishing residual characterizes pairs with the same unparameterized
geodesics.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateMetric, SingularL, ZeroInImage
from ..fields import (
    MetricField,
    OperatorField,
    VectorField,
    covariant_derivative_op,
    lie_derivative_metric,
    sample_points,
)
from ..smallmat import ScalarFunction, char_poly, eigen, frob, matrix_function

EPS_DEG = 1e-10


def _dets_or_raise(gv, gbv, p):
    dg = float(np.linalg.det(gv))
    dgb = float(np.linalg.det(gbv))
    if abs(dg) <= EPS_DEG or abs(dgb) <= EPS_DEG:
        raise DegenerateMetric(
            f"metric degenerate at {np.asarray(p)} (dets {dg:.3e}, {dgb:.3e})",
            point=p,
        )
    return dg, dgb


def compute_L(g: MetricField, gbar: MetricField, p, return_flag: bool = False):
    """Pointwise value of the pair tensor L(g, gbar).

    The (n+1)-th root of the determinant ratio is taken sign-preserving
    when n+1 is odd.  When n+1 is even and the ratio is negative, g is
    replaced by -g first; ``return_flag=True`` also returns whether that
    flip happened.
    """
    p = np.asarray(p, dtype=float)
    n = g.chart.dim
    gv = g.value(p)
    gbv = gbar.value(p)
    dg, dgb = _dets_or_raise(gv, gbv, p)
    ratio = dgb / dg
    flipped = False
    if (n + 1) % 2 == 0 and ratio < 0.0:
        gv = -gv
        ratio = -ratio
        flipped = True
    if (n + 1) % 2 == 1:
        rho = np.sign(ratio) * abs(ratio) ** (1.0 / (n + 1))
    else:
        rho = ratio ** (1.0 / (n + 1))
    lv = rho * np.linalg.solve(gbv, gv)
    if return_flag:
        return lv, flipped
    return lv


def l_tensor_field(g: MetricField, gbar: MetricField) -> OperatorField:
    """Pair tensor as an operator field with an exact jacobian.

    Derivatives are obtained by forward-mode matrix calculus through the
    determinant, inverse and root, so they are as accurate as the metric
    derivatives themselves (exact for expression-backed metrics).  The
    field carries ``sign_flipped`` reflecting the orientation fix at the
    base point.
    """
    chart = g.chart
    n = chart.dim

    def value_and_jac(p):
        gv, dgv = g.value_and_derivative(p)
        gbv, dgbv = gbar.value_and_derivative(p)
        dg, dgb = _dets_or_raise(gv, gbv, p)
        ratio = dgb / dg
        if (n + 1) % 2 == 0 and ratio < 0.0:
            gv, dgv = -gv, -dgv
            dg = float(np.linalg.det(gv))
            ratio = -ratio
        ginv = np.linalg.inv(gv)
        gbinv = np.linalg.inv(gbv)
        # d det A = det A * tr(A^{-1} dA)
        ddg = dg * np.einsum("ij,kji->k", ginv, dgv)
        ddgb = dgb * np.einsum("ij,kji->k", gbinv, dgbv)
        dratio = (ddgb * dg - dgb * ddg) / dg**2
        if (n + 1) % 2 == 1:
            rho = np.sign(ratio) * abs(ratio) ** (1.0 / (n + 1))
        else:
            rho = ratio ** (1.0 / (n + 1))
        drho = rho * dratio / ((n + 1) * ratio)
        core = gbinv @ gv
        lv = rho * core
        dgbinv = -np.einsum("ij,kjl,lm->kim", gbinv, dgbv, gbinv)
        dl = (
            np.einsum("k,ij->kij", drho, core)
            + rho * np.einsum("kij,jl->kil", dgbinv, gv)
            + rho * np.einsum("ij,kjl->kil", gbinv, dgv)
        )
        return lv, dl

    field = OperatorField.from_function(
        chart, lambda p: compute_L(g, gbar, p), jac=value_and_jac
    )
    _, flipped = compute_L(g, gbar, chart.base_point, return_flag=True)
    field.sign_flipped = flipped
    return field


def reconstruct_gbar(g: MetricField, L: OperatorField, p) -> np.ndarray:
    """Second metric of the pair from (g, L): gbar = (1/det L) g L^{-1}."""
    p = np.asarray(p, dtype=float)
    lv = L.value(p)
    det = float(np.linalg.det(lv))
    if abs(det) <= EPS_DEG:
        raise SingularL(f"operator singular at {p} (det {det:.3e})", point=p)
    gb = g.value(p) @ np.linalg.inv(lv) / det
    return 0.5 * (gb + gb.T)


def compatibility_residual(g: MetricField, L: OperatorField, p):
    """Residual of the geodesic-equivalence compatibility equation.

    Returns ``(scalar, array)``: the Frobenius norm of the residual
    normalized by ``1 + ||dL||``, and the raw residual array indexed like
    the covariant derivative output.
    """
    p = np.asarray(p, dtype=float)
    nabla = covariant_derivative_op(g, L, p)
    lv, dl = L.value_and_derivative(p)
    # l_q = d_q tr L
    l_cov = np.einsum("kii->k", dl)
    gv = g.value(p)
    ginv = np.linalg.inv(gv)
    n = g.chart.dim
    eye = np.eye(n)
    # 1/2 (delta^i_k l_j + g^{is} l_s g_{kj}); differentiation index k last
    rhs = 0.5 * (
        np.einsum("ik,j->ijk", eye, l_cov)
        + np.einsum("i,kj->ijk", ginv @ l_cov, gv)
    )
    resid = nabla - rhs
    scale = 1.0 + frob(dl)
    return frob(resid) / scale, resid


def topalov_sinjukov(g: MetricField, gbar: MetricField, f: ScalarFunction,
                     check_points: int = 20, seed: int = 42):
    """Rescale the pair by an operator function: (g f(L), gbar f(L)).

    For f holomorphic near the spectrum of L and conjugation-symmetric,
    the transformed pair is geodesically equivalent whenever the input
    pair is.  Requires 0 outside ``f(spectrum L)`` everywhere on the
    chart; checked eagerly on deterministic samples and lazily at every
    evaluation.  Applying the constant-one function returns the input
    fields unchanged.
    """
    if f.name == "one":
        return g, gbar
    chart = g.chart
    L = l_tensor_field(g, gbar)

    def f_of_l(p):
        lv = L.value(p)
        spec = eigen(lv)
        scale = 1.0 + max(abs(f.value(z)) for z, _ in spec.entries)
        for z, _ in spec.entries:
            if abs(f.value(z)) <= 1e-10 * scale:
                raise ZeroInImage(
                    f"f({z}) is numerically zero at {np.asarray(p)}",
                    witness=z,
                    point=p,
                )
        return matrix_function(lv, f)

    def make(metric):
        def fn(p):
            m = metric.value(p) @ f_of_l(p)
            return 0.5 * (m + m.T)

        return MetricField.from_function(chart, fn)

    gf, gbf = make(g), make(gbar)
    pts = np.vstack([sample_points(chart, check_points, seed),
                     [chart.base_point]])
    for p in pts:
        gf.value(p)
        gbf.value(p)
    return gf, gbf


def charpoly_differential_residual(L: OperatorField, t: float, p) -> np.ndarray:
    """Residual covector of the characteristic-polynomial differential
    identity  d(chi(t)) . L - t * d(chi(t)) = chi(t) * l.

    The coefficient differentials are taken by central finite differences;
    l = d tr L uses the field's own derivative method.  Valid whenever the
    Nijenhuis torsion of L vanishes at p.
    """
    p = np.asarray(p, dtype=float)
    n = L.chart.dim

    def coeffs_at(q):
        return np.array(char_poly(L.value(q)).coeffs)

    steps = 6e-6 * (1.0 + np.abs(p))
    dcoeffs = np.empty((n, n))  # [coord, coefficient index]
    for k in range(n):
        pp, pm = p.copy(), p.copy()
        pp[k] += steps[k]
        pm[k] -= steps[k]
        dcoeffs[k] = (coeffs_at(pp) - coeffs_at(pm)) / (2.0 * steps[k])
    powers = np.array([t**j for j in range(n)])
    dchi = dcoeffs @ powers
    lv, dl = L.value_and_derivative(p)
    l_cov = np.einsum("kii->k", dl)
    chi_t = char_poly(lv)(t)
    return dchi @ lv - t * dchi - chi_t * l_cov


def projective_deformation(v: VectorField, g: MetricField) -> OperatorField:
    """Trace-free part of g^{-1} (Lie_v g): compatible with g whenever v
    is a projective vector field of g."""
    chart = g.chart
    n = chart.dim

    def fn(p):
        gv = g.value(p)
        det = float(np.linalg.det(gv))
        if abs(det) <= EPS_DEG:
            raise DegenerateMetric(f"metric degenerate at {np.asarray(p)}", point=p)
        a = np.linalg.solve(gv, lie_derivative_metric(v, g, p))
        return a - (np.trace(a) / (n + 1)) * np.eye(n)

    return OperatorField.from_function(chart, fn)


def shift_to_nondegenerate(L: OperatorField, points=None, det_tol: float = 1e-6):
    """Shift L by c * Id when it is singular somewhere on the samples.

    Returns ``(shifted_field, c)`` with c = 0 when no shift was needed and
    c = 1 + max ||L|| otherwise.  Compatibility with any metric is
    preserved under the shift.
    """
    chart = L.chart
    if points is None:
        points = np.vstack([sample_points(chart, 20, 42), [chart.base_point]])
    norms, mindet = [], np.inf
    for p in points:
        lv = L.value(p)
        norms.append(frob(lv))
        mindet = min(mindet, abs(float(np.linalg.det(lv))))
    if mindet > det_tol:
        return L, 0.0
    c = 1.0 + max(norms)
    n = chart.dim

    def fn(p):
        return L.value(p) + c * np.eye(n)

    def jac(p):
        lv, dl = L.value_and_derivative(p)
        return lv + c * np.eye(n), dl

    return OperatorField.from_function(chart, fn, jac=jac), c
