import math

import numpy as np
import pytest

from crystalflow.errors import ConfigError, InputError
from crystalflow.norms import (
    CrystallineNorm,
    EuclideanNorm,
    PNorm,
    SumNorm,
    WulffShape,
    crystalline_l1,
    ellipticity_constants,
    eval_norm,
    hexagonal_norm,
    norm_from_spec,
    polar_eval,
    regularize_mobility,
    subgradient_select,
)

RNG = np.random.default_rng(7)


def sample_norms():
    return [
        EuclideanNorm(2),
        EuclideanNorm(2, matrix=[[2.0, 0.3], [0.3, 1.0]]),
        PNorm(2, 1.0),
        PNorm(2, 3.0),
        PNorm(2, math.inf),
        crystalline_l1(2),
        hexagonal_norm(),
    ]


def test_eval_desk_values():
    assert eval_norm(crystalline_l1(2), [3, 4]) == pytest.approx(7.0)
    assert eval_norm(EuclideanNorm(2), [3, 4]) == pytest.approx(5.0)
    assert eval_norm(hexagonal_norm(), [1, 0]) == pytest.approx(1.0)


def test_polar_desk_values():
    assert polar_eval(crystalline_l1(2), [3, 4]) == pytest.approx(4.0)  # linf
    assert polar_eval(EuclideanNorm(2), [3, 4]) == pytest.approx(5.0)  # self-dual
    # (1, 0) is a vertex of the hexagon's polar ball
    assert polar_eval(hexagonal_norm(), [1, 0]) == pytest.approx(1.0, abs=1e-9)


def test_subgradient_desk_values():
    l1 = PNorm(2, 1.0)
    assert np.allclose(subgradient_select(l1, [2, 0]), [1, 0])
    assert np.allclose(subgradient_select(l1, [1, 1]), [1, 1])
    assert np.allclose(subgradient_select(l1, [0, 0]), [0, 0])


def test_crystalline_tie_break_lowest_index():
    n = CrystallineNorm([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    # (1, 0) is maximized by facets 0 and 1; the first wins
    assert np.allclose(n.subgradient([1.0, 0.0]), [1, 1])


@pytest.mark.parametrize("norm", sample_norms(), ids=lambda n: n.kind + str(id(n) % 97))
def test_subgradient_certificate(norm):
    for _ in range(40):
        v = RNG.normal(size=2)
        xi = norm.subgradient(v)
        lo, hi = norm.polar_bracket(xi)
        assert lo <= 1.0 + 1e-10
        assert hi >= 1.0 - 1e-10
        assert xi @ v == pytest.approx(norm(v), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize(
    "norm",
    [EuclideanNorm(2), EuclideanNorm(2, matrix=[[2.0, 0.3], [0.3, 1.0]]),
     PNorm(2, 1.0), PNorm(2, 3.0), PNorm(2, math.inf),
     crystalline_l1(2), hexagonal_norm()],
    ids=["l2", "weighted", "l1", "l3", "linf", "l1c", "hex"],
)
def test_polar_involution(norm):
    back = norm.polar().polar()
    for _ in range(200):
        v = RNG.normal(size=2) * RNG.uniform(0.1, 10)
        assert abs(back(v) - norm(v)) <= 1e-10 * max(norm(v), 1e-30)


@pytest.mark.parametrize("norm", sample_norms(), ids=lambda n: n.kind + str(id(n) % 97))
def test_homogeneity_and_symmetry(norm):
    for _ in range(30):
        v = RNG.normal(size=2)
        base = norm(v)
        assert norm(-v) == pytest.approx(base, abs=1e-12 * max(1, base))
        for t in (0.5, 2.0, 7.0):
            assert norm(t * v) == pytest.approx(t * base, rel=1e-12)


def test_ellipticity_identical():
    assert ellipticity_constants(crystalline_l1(2), crystalline_l1(2)) == (1.0, 1.0)


def test_ellipticity_euclid_vs_l1():
    c1, c2 = ellipticity_constants(EuclideanNorm(2), PNorm(2, 1.0))
    # l2/linf over directions: min 1 on the axes, max sqrt(2) on the diagonal
    assert c1 <= 1.0 <= c1 + 5e-3
    assert c2 >= math.sqrt(2) >= c2 - 5e-3


def test_ellipticity_scaled_euclidean():
    c1, c2 = ellipticity_constants(EuclideanNorm(2, scale=2), EuclideanNorm(2))
    assert (c1, c2) == pytest.approx((0.5, 0.5))


def test_ellipticity_certified_bounds_hold():
    pairs = [
        (EuclideanNorm(2), PNorm(2, 1.0)),
        (hexagonal_norm(), crystalline_l1(2)),
        (SumNorm([(1.0, EuclideanNorm(2)), (0.2, crystalline_l1(2))]), crystalline_l1(2)),
    ]
    for a, b in pairs:
        c1, c2 = ellipticity_constants(a, b)
        for _ in range(500):
            v = RNG.normal(size=2)
            pa = a.polar_bracket(v)
            pb = b.polar_value(v)
            assert c1 * pb <= pa[1] + 1e-9
            assert pa[0] <= c2 * pb + 1e-9


def test_regularize_mobility():
    psi = EuclideanNorm(2)
    phi = PNorm(2, 1.0)
    assert regularize_mobility(psi, 0.0, phi) is psi
    s = regularize_mobility(psi, 0.1, phi)
    assert s([1, 0]) == pytest.approx(1.1)
    with pytest.raises(InputError):
        regularize_mobility(psi, -0.1, phi)


def test_regularize_tightens_ellipticity():
    psi = EuclideanNorm(2)
    phi = crystalline_l1(2)
    _, c2_plain = ellipticity_constants(psi, phi)
    _, c2_reg = ellipticity_constants(regularize_mobility(psi, 0.5, phi), phi)
    # relative anisotropy gap shrinks under regularization
    assert c2_reg / (1.0 + 0.5) < c2_plain


def test_sum_polar_bracket_contains_dense_supremum():
    s = SumNorm([(1.0, EuclideanNorm(2)), (0.3, crystalline_l1(2))])
    for _ in range(10):
        v = RNG.normal(size=2) * 3
        lo, hi = s.polar_bracket(v)
        dirs = RNG.normal(size=(20000, 2))
        sup = np.max(dirs @ v / s.eval_field(dirs.T))
        assert sup <= hi + 1e-12  # certified upper bound dominates any sample
        assert lo <= hi
        assert abs(lo - sup) <= 1e-3 * max(sup, 1e-9)  # both approximate the sup


def test_sum_single_term_polar_exact():
    s = SumNorm([(2.0, EuclideanNorm(2))])
    assert s.polar_value([3, 4]) == pytest.approx(2.5)  # (2*l2)° = l2/2


def test_json_round_trip():
    for norm in sample_norms():
        clone = norm_from_spec(norm.spec())
        for _ in range(10):
            v = RNG.normal(size=2)
            assert clone(v) == pytest.approx(norm(v), rel=1e-12)


def test_json_errors():
    with pytest.raises(ConfigError):
        norm_from_spec({"kind": "l2"})  # missing dimension
    with pytest.raises(ConfigError):
        norm_from_spec({"kind": "banana", "dim": 2})
    with pytest.raises(ConfigError):
        norm_from_spec({"kind": "crystalline", "dim": 2})


def test_crystalline_validation():
    with pytest.raises(ConfigError):
        CrystallineNorm([[1, 0], [-1, 0]])  # does not span R^2
    with pytest.raises(ConfigError):
        CrystallineNorm([[1, 0], [0, 1]])  # not symmetric


def test_projection_desk_values():
    l1c = crystalline_l1(2)
    out = l1c.project_polar_ball_field(np.array([[2.0], [-0.5]]))
    assert np.allclose(out.ravel(), [1.0, -0.5])
    l2 = EuclideanNorm(2)
    out = l2.project_polar_ball_field(np.array([[3.0], [4.0]]))
    assert np.allclose(out.ravel(), [0.6, 0.8])


def test_projection_hexagon_against_sampling():
    hexn = hexagonal_norm()
    w = np.array([1.4, 0.8])
    proj = hexn.project_polar_ball_field(w[:, None])[:, 0]
    # dense sampling of the polar ball boundary (w is outside, so the
    # projection lies on an edge of the hexagon)
    t = np.linspace(0.0, 1.0, 170_000)[:, None]
    pts = np.vstack([
        (1 - t) * hexn.facets[i] + t * hexn.facets[(i + 1) % 6] for i in range(6)
    ])
    best = pts[np.argmin(np.sum((pts - w) ** 2, axis=1))]
    assert np.linalg.norm(proj - best) <= 1e-4
    assert hexn.polar_value(proj) <= 1.0 + 1e-9


def test_projection_lq_ball_variational():
    n = PNorm(2, 3.0)  # polar ball is the l_{3/2} ball
    q = n.q
    for _ in range(20):
        w = RNG.normal(size=2) * 2
        p = n.project_polar_ball_field(w[:, None])[:, 0]
        assert np.sum(np.abs(p) ** q) ** (1 / q) <= 1 + 1e-8
        for _ in range(50):
            other = RNG.normal(size=2)
            other /= max(np.sum(np.abs(other) ** q) ** (1 / q), 1.0)
            # variational inequality of the Euclidean projection
            assert (w - p) @ (other - p) <= 1e-6


def test_sum_projection_unsupported():
    s = SumNorm([(1.0, EuclideanNorm(2)), (0.3, crystalline_l1(2))])
    with pytest.raises(InputError):
        s.project_polar_ball_field(np.array([[2.0], [2.0]]))


def test_wulff_shape_membership():
    w = WulffShape(crystalline_l1(2), [0.0, 0.0], 0.5)
    pts = np.array([[0.4, 0.6, 0.45], [0.3, 0.0, 0.45]])
    assert list(w.membership(pts)) == [True, False, True]


def test_3d_smoke():
    l1c3 = crystalline_l1(3)
    assert l1c3([1, 2, 3]) == pytest.approx(6.0)
    assert l1c3.polar_value([1, 2, 3]) == pytest.approx(3.0, abs=1e-8)
    e3 = EuclideanNorm(3)
    c1, c2 = ellipticity_constants(e3, PNorm(3, 1.0))
    assert c1 <= 1.0 + 1e-9
    assert c2 >= math.sqrt(3) - 0.05
