import numpy as np
import pytest

from gaplab.group_core import build_cyclic, build_sl2_quotient, word_ball
from gaplab.measures import (
    DiscreteMeasure,
    dirac,
    uniform_on,
)
from gaplab.rep_markov import (
    Decomposition,
    MarkovOperator,
    Representation,
    VectorField,
    iterate_to_projection,
    markov_operator,
    neumann_projection,
    operator_identities_check,
    restricted_norm,
)


def _z4_setup(p=2.0, d=1):
    act = build_cyclic(4)
    rep = Representation(act, p=p, d=d)
    mu = uniform_on(
        [act.identity_element(), act.generator_element("g"), act.generator_element("g^-1")]
    )
    return act, rep, markov_operator(rep, mu)


def _z2_setup():
    act = build_cyclic(2)
    rep = Representation(act, p=2.0)
    mu = uniform_on([act.identity_element(), act.generator_element("g")])
    return act, rep, markov_operator(rep, mu)


def test_markov_dirac_is_identity():
    act = build_cyclic(5)
    rep = Representation(act)
    op = markov_operator(rep, dirac(act.identity_element()))
    assert np.allclose(op.dense(), np.eye(5))


def test_markov_one_point_action():
    act = build_cyclic(1)
    rep = Representation(act)
    op = markov_operator(rep, dirac(act.identity_element()))
    assert op.dense().shape == (1, 1)
    assert op.dense()[0, 0] == 1.0
    est = restricted_norm(op)
    assert est.value == 0.0 and est.quality == "exact"


def test_markov_z4_circulant_stencil():
    _act, _rep, op = _z4_setup()
    a = op.dense()
    expected_row = np.array([1 / 3, 1 / 3, 0.0, 1 / 3])
    for i in range(4):
        assert np.allclose(a[i], np.roll(expected_row, i))
    assert np.allclose(a.sum(axis=1), 1.0)


def test_markov_rejects_foreign_measure():
    act = build_cyclic(4)
    other = build_cyclic(5)
    rep = Representation(act)
    mu = uniform_on([other.identity_element(), other.generator_element("g")])
    with pytest.raises(ValueError):
        markov_operator(rep, mu)


def test_restricted_norm_z2_is_zero():
    _act, _rep, op = _z2_setup()
    est = restricted_norm(op)
    assert est.quality == "exact"
    assert est.value == pytest.approx(0.0, abs=1e-10)


def _fourier_eigenvalues_z4():
    # oracle: circulant eigenvalues (1 + 2 cos(2 pi k / 4)) / 3 on modes k=1,2,3
    return [(1.0 + 2.0 * np.cos(2.0 * np.pi * k / 4)) / 3.0 for k in (1, 2, 3)]


def test_restricted_norm_z4_fourier_oracle():
    _act, _rep, op = _z4_setup()
    oracle = max(abs(e) for e in _fourier_eigenvalues_z4())
    assert oracle == pytest.approx(1 / 3)
    est = restricted_norm(op)
    assert est.quality == "exact"
    assert est.value == pytest.approx(oracle, abs=1e-10)


def test_restricted_norm_z4_fiber_dimension_invariant():
    _act, _rep, op = _z4_setup(d=3)
    est = restricted_norm(op)
    assert est.value == pytest.approx(1 / 3, abs=1e-9)


def test_restricted_norm_identity_operator():
    act = build_cyclic(4)
    rep = Representation(act)
    op = markov_operator(rep, dirac(act.identity_element()))
    est = restricted_norm(op)
    assert est.value == pytest.approx(1.0, abs=1e-10)


def test_restricted_norm_lp_lower_bound_quality():
    _act, _rep, op = _z4_setup(p=3.0)
    est = restricted_norm(op, seed=1, n_starts=4)
    assert est.quality == "lower_bound"
    assert est.upper == 1.0
    # the spectral radius 1/3 is attained by an eigenvector, so the lower
    # bound cannot fall below it
    assert est.value >= 1 / 3 - 1e-9
    assert est.value <= 1.0 + 1e-12


def test_isometry_of_generators():
    act = build_sl2_quotient(3, variant="b")
    rng = np.random.default_rng(3)
    for p in (1.5, 2.0, 3.0):
        rep = Representation(act, p=p, d=2)
        f = rng.standard_normal((act.n_points, 2))
        for lab in act.gens.labels:
            g = act.generator_element(lab)
            assert rep.norm(rep.apply_element(g, f)) == pytest.approx(
                rep.norm(f), abs=1e-12
            )


def test_markov_contraction_on_random_fields():
    _act, rep, op = _z4_setup(p=1.5)
    rng = np.random.default_rng(11)
    for _ in range(20):
        f = rng.standard_normal((4, 1))
        assert rep.norm(op.apply(f)) <= rep.norm(f) + 1e-12


def test_mean_preservation():
    act = build_sl2_quotient(4, variant="b")
    rep = Representation(act)
    mu = uniform_on([act.identity_element()] + [act.generator_element(l) for l in act.gens.labels])
    op = markov_operator(rep, mu)
    dec = op.decomposition
    rng = np.random.default_rng(5)
    f = rng.standard_normal((act.n_points, 1))
    assert np.allclose(dec.mean(op.apply(f)), dec.mean(f), atol=1e-12)


def test_neumann_projection_trivial_rep():
    act = build_cyclic(1)
    rep = Representation(act)
    op = markov_operator(rep, dirac(act.identity_element()))
    p = neumann_projection(op)
    assert np.allclose(p, np.eye(1))


def test_neumann_projection_z2_single_term():
    _act, _rep, op = _z2_setup()
    p = neumann_projection(op)
    assert np.allclose(p, np.full((2, 2), 0.5), atol=1e-14)


def test_neumann_projection_z4_matches_mean_projector():
    _act, _rep, op = _z4_setup()
    p = neumann_projection(op)
    assert np.max(np.abs(p - op.decomposition.mean_matrix())) <= 1e-10


def test_neumann_rejects_non_gapped():
    act = build_cyclic(4)
    rep = Representation(act)
    op = markov_operator(rep, dirac(act.generator_element("g")))
    with pytest.raises(ValueError):
        neumann_projection(op)


def test_neumann_agrees_with_iteration_limit():
    _act, _rep, op = _z4_setup()
    p = neumann_projection(op)
    ak = iterate_to_projection(op, 60).power
    assert np.max(np.abs(ak - p)) <= 1e-9


def test_iterate_defect_k0_is_one():
    _act, _rep, op = _z4_setup()
    res = iterate_to_projection(op, 0)
    assert res.defect == pytest.approx(1.0, abs=1e-12)


def test_iterate_defect_z2_collapses_after_one_step():
    _act, _rep, op = _z2_setup()
    assert iterate_to_projection(op, 1).defect == pytest.approx(0.0, abs=1e-14)


def test_iterate_defect_z4_five_steps():
    _act, _rep, op = _z4_setup()
    res = iterate_to_projection(op, 5)
    lam = restricted_norm(op).value
    assert res.defect <= lam**5 + 1e-12
    assert res.defect == pytest.approx((1 / 3) ** 5, abs=1e-12)


def test_iterate_defect_lp_mode():
    _act, _rep, op = _z4_setup(p=1.5)
    res3 = iterate_to_projection(op, 3, seed=2)
    res6 = iterate_to_projection(op, 6, seed=2)
    assert res3.mode == "sampled-ratio"
    assert res3.defect <= 1.0 + 1e-12
    assert res6.defect <= res3.defect + 1e-12  # contraction in k


def test_projector_algebra():
    _act, _rep, op = _z4_setup()
    a = op.dense()
    p = op.decomposition.mean_matrix()
    assert np.max(np.abs(p @ p - p)) <= 1e-12
    assert np.max(np.abs(a @ p - p)) <= 1e-12
    assert np.max(np.abs(p @ a - p)) <= 1e-12


def test_projectors_commute_with_generators():
    act = build_sl2_quotient(3, variant="b")
    rep = Representation(act)
    dec = Decomposition(rep)
    rng = np.random.default_rng(17)
    f = rng.standard_normal((act.n_points, 1))
    for lab in act.gens.labels:
        g = act.generator_element(lab)
        lhs = dec.mean(rep.apply_element(g, f))
        rhs = rep.apply_element(g, dec.mean(f))
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_identities_trivial_measures():
    act = build_cyclic(4)
    rep = Representation(act)
    e = dirac(act.identity_element())
    report = operator_identities_check(rep, e, e)
    assert report.ok
    assert report.convolution_defect == 0.0


def test_identities_z4():
    act = build_cyclic(4)
    rep = Representation(act)
    mu = uniform_on([act.identity_element(), act.generator_element("g"),
                     act.generator_element("g^-1")])
    nu = dirac(act.generator_element("g"))
    report = operator_identities_check(rep, mu, nu)
    assert report.ok, report.violations()


def _random_action(rng, n=8, n_gens=3):
    from gaplab.group_core import FiniteAction, GeneratorSystem

    labels = []
    inverses = {}
    perms = {}
    for i in range(n_gens):
        lab, inv = f"s{i}", f"s{i}^-1"
        perm = rng.permutation(n)
        labels += [lab, inv]
        inverses[lab] = inv
        inverses[inv] = lab
        perms[lab] = perm
        q = np.empty(n, dtype=np.int64)
        q[perm] = np.arange(n)
        perms[inv] = q
    gens = GeneratorSystem(labels=tuple(labels), inverses=inverses)
    return FiniteAction(list(range(n)), np.full(n, 1.0 / n), gens, perms)


def test_identities_random_actions_seeded():
    rng = np.random.default_rng(99)
    for _ in range(10):
        act = _random_action(rng)
        rep = Representation(act)
        ball = word_ball(act, 2)
        idx = rng.choice(len(ball), size=3, replace=False)
        w = rng.random(3) + 0.1
        w /= w.sum()
        mu = DiscreteMeasure({ball[i]: float(x) for i, x in zip(idx, w)})
        idx2 = rng.choice(len(ball), size=2, replace=False)
        w2 = rng.random(2) + 0.1
        w2 /= w2.sum()
        nu = DiscreteMeasure({ball[i]: float(x) for i, x in zip(idx2, w2)})
        report = operator_identities_check(rep, mu, nu)
        assert report.ok, report.violations()


def test_submultiplicativity_of_restricted_norm():
    act = build_cyclic(6)
    rep = Representation(act)
    mu = uniform_on([act.identity_element(), act.generator_element("g")])
    nu = uniform_on([act.generator_element("g"), act.generator_element("g^-1")])
    from gaplab.measures import convolve

    lam_mu = restricted_norm(markov_operator(rep, mu)).value
    lam_nu = restricted_norm(markov_operator(rep, nu)).value
    lam_conv = restricted_norm(markov_operator(rep, convolve(mu, nu))).value
    assert lam_conv <= lam_mu * lam_nu + 1e-9


def test_torus_action_per_orbit_decomposition():
    act = build_sl2_quotient(4, variant="b")
    rep = Representation(act)
    dec = Decomposition(rep)
    assert dec.n_orbits == len(act.orbits()) > 1
    rng = np.random.default_rng(23)
    f = rng.standard_normal((act.n_points, 1))
    m = dec.mean(f)
    # invariant under every generator
    for lab in act.gens.labels:
        assert np.allclose(rep.apply_element(act.generator_element(lab), m), m)
    # idempotent
    assert np.allclose(dec.mean(m), m, atol=1e-14)
    mu = uniform_on([act.identity_element()] + [act.generator_element(l) for l in act.gens.labels])
    op = markov_operator(rep, mu)
    est = restricted_norm(op)
    assert est.value < 1.0 - 1e-6
    pn = neumann_projection(op, norm=est)
    assert np.max(np.abs(pn - dec.mean_matrix())) <= 1e-10


def test_vector_field_norm_cache():
    act = build_cyclic(4)
    rep = Representation(act, p=3.0)
    vf = VectorField(rep, np.arange(4.0))
    assert vf.norm == pytest.approx(rep.norm(np.arange(4.0)))


def test_operator_coo_export():
    _act, _rep, op = _z4_setup()
    coo = op.to_coo()
    total = sum(v for _, _, v in coo)
    assert total == pytest.approx(4.0)  # rows sum to 1 each
    dense = np.zeros((4, 4))
    for i, j, v in coo:
        dense[i, j] += v
    assert np.allclose(dense, op.dense())
