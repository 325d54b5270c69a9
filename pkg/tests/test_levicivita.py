"""Normal-form corpus generator."""

import numpy as np
import pytest

from geoequiv.equiv import (
    LeviCivitaSpec,
    MultiBlock,
    SimpleEigenvalue,
    compatibility_residual,
    l_tensor_field,
    levi_civita_pair,
)
from geoequiv.errors import EigenvalueCollision, NonPositiveWeight
from geoequiv.fields import sample_points
from geoequiv.smallmat import eigen


def test_two_simple_eigenvalues_frozen_weights():
    spec = LeviCivitaSpec(
        simple=(
            SimpleEigenvalue("1 + 0.1*sin(x0)", (-0.5, 0.5)),
            SimpleEigenvalue("2", (-0.5, 0.5)),
        ),
        blocks=(),
    )
    g, gbar = levi_civita_pair(spec)
    p0 = np.array(g.chart.base_point)
    lam1 = 1.0 + 0.1 * np.sin(p0[0])
    w = 2.0 - lam1
    assert np.allclose(g.value(p0), np.diag([w, w]))
    assert np.allclose(
        gbar.value(p0),
        np.diag([w / (lam1**2 * 2.0), w / (4.0 * lam1)]),
    )
    L = l_tensor_field(g, gbar)
    for p in sample_points(g.chart, 100, seed=42):
        res, _ = compatibility_residual(g, L, p)
        assert res <= 1e-9
        lam1p = 1.0 + 0.1 * np.sin(p[0])
        got = sorted(z.real for z in eigen(L.value(p)).eigenvalues())
        assert np.allclose(got, [lam1p, 2.0], atol=1e-8)


def test_single_block_is_conformal_pair():
    spec = LeviCivitaSpec(
        simple=(),
        blocks=(
            MultiBlock(
                3.0,
                3,
                (
                    ("1", "0", "0.1*x2"),
                    (None, "1 + 0.2*x0^2", "0"),
                    (None, None, "2"),
                ),
                ((-0.4, 0.4),) * 3,
            ),
        ),
    )
    g, gbar = levi_civita_pair(spec)
    for p in sample_points(g.chart, 20, seed=3):
        assert np.allclose(gbar.value(p), g.value(p) / 3.0**4, atol=1e-12)


def test_eigenvalue_collision_rejected():
    spec = LeviCivitaSpec(
        simple=(
            SimpleEigenvalue("1 + x0", (-0.5, 0.5)),
            SimpleEigenvalue("1 - x0", (-0.5, 0.5)),
        ),
        blocks=(),
    )
    with pytest.raises(EigenvalueCollision):
        levi_civita_pair(spec)


def test_vanishing_eigenvalue_rejected():
    spec = LeviCivitaSpec(
        simple=(
            SimpleEigenvalue("x0", (-0.5, 0.5)),
            SimpleEigenvalue("2", (-0.5, 0.5)),
        ),
        blocks=(),
    )
    with pytest.raises(NonPositiveWeight):
        levi_civita_pair(spec)


def test_signature_signs_respected():
    spec = LeviCivitaSpec(
        simple=(
            SimpleEigenvalue("1 + 0.1*x0", (-0.4, 0.4), sign=-1),
            SimpleEigenvalue("2", (-0.4, 0.4)),
        ),
        blocks=(),
    )
    g, gbar = levi_civita_pair(spec)
    gv = g.value(g.chart.base_point)
    assert gv[0, 0] < 0 < gv[1, 1]
    L = l_tensor_field(g, gbar)
    worst = max(
        compatibility_residual(g, L, p)[0]
        for p in sample_points(g.chart, 30, seed=5)
    )
    assert worst <= 1e-9


def test_full_corpus_compatibility(corpus):
    for name, (g, gbar) in corpus.items():
        L = l_tensor_field(g, gbar)
        worst = max(
            compatibility_residual(g, L, p)[0]
            for p in sample_points(g.chart, 30, seed=7)
        )
        assert worst <= 1e-9, name


def test_from_dict_round_trip():
    spec = LeviCivitaSpec.from_dict(
        {
            "simple": [
                {"lambda": "1 + 0.1*sin(x0)", "interval": [-0.5, 0.5]},
                {"lambda": "2", "interval": [-0.5, 0.5], "sign": -1},
            ],
            "blocks": [
                {
                    "lambda": 4.0,
                    "dim": 2,
                    "metric": [["1", "0"], [None, "1.5"]],
                    "intervals": [[-0.4, 0.4], [-0.4, 0.4]],
                }
            ],
        }
    )
    assert spec.dim == 4
    g, gbar = levi_civita_pair(spec)
    assert g.chart.dim == 4
    gv = g.value(g.chart.base_point)
    assert gv[1, 1] < 0  # requested signature sign
