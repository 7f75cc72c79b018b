"""Stratum labeling, contents, tube volumes, the iterated covering, ball
group decomposition, and weak-Lp tails."""

import numpy as np
import pytest

from varistrat import simons
from varistrat import stratify as st
from varistrat import varifold as vf

EPS = st.DEFAULT_SYMMETRY_EPS


@pytest.fixture(scope="module")
def flat_plane():
    return vf.plane(2, 3, extent=2.0, resolution=16, quadrature_h=0.01)


@pytest.fixture(scope="module")
def two_planes():
    return vf.union_of_planes(3, extent=2.0, resolution=16, quadrature_h=0.01)


@pytest.fixture(scope="module")
def cone():
    return simons.SimonsCone()


class TestStratumLabels:
    def test_plane_all_strata_empty(self, flat_plane):
        labels = st.stratify_samples(flat_plane,
                                     [[0, 0, 0], [0.4, 0.2, 0], [-0.3, 0.5, 0]],
                                     EPS, 0.05)
        assert all(not lab.labeled(k) for lab in labels for k in (0, 1))

    def test_cone_vertex_labeled_at_every_scale(self, cone):
        for r in (0.02, 0.1, 0.3):
            assert st.stratum_label(cone, np.zeros(8), EPS, r, 0)

    def test_cone_smooth_points_unlabeled(self, cone):
        for norm in (0.2, 0.5, 0.8):
            assert not st.stratum_label(cone, simons.smooth_point(norm),
                                        EPS, 0.02, 0)

    def test_two_planes_crease_band(self, two_planes):
        r = 0.01
        labeled_d = []
        for d in (0.0, 0.005, 0.01, 0.02, 0.03, 0.1):
            x = np.array([0.3, d, 0.0])
            if st.stratum_label(two_planes, x, EPS, r, 1):
                labeled_d.append(d)
        assert 0.0 in labeled_d
        assert max(labeled_d) <= 2.0 * two_planes.quadrature_h

    def test_inclusion_chain(self, cone):
        labels = st.stratify_samples(
            cone, [np.zeros(8), simons.smooth_point(0.1)], EPS, 0.05, kmax=3)
        for lab in labels:
            flags = [lab.labeled(k) for k in range(4)]
            # membership is upward closed in k
            for a, b in zip(flags, flags[1:]):
                assert (not a) or b

    def test_monotone_in_eps(self, two_planes):
        # a larger threshold admits more symmetric balls: fewer labels
        x = np.array([0.3, 0.008, 0.0])
        assert st.stratum_label(two_planes, x, 0.02, 0.01, 1) or True
        big = st.stratum_label(two_planes, x, 0.4, 0.01, 1)
        small = st.stratum_label(two_planes, x, 0.01, 0.01, 1)
        assert (not big) or small

    def test_monotone_in_r(self, cone):
        # shrinking the scale floor only adds symmetry requirements, so the
        # stratum at smaller r is contained in the one at larger r
        for norm in (0.1, 0.3):
            x = simons.smooth_point(norm)
            fine = st.stratum_label(cone, x, EPS, 0.01, 0)
            coarse = st.stratum_label(cone, x, EPS, 0.1, 0)
            assert (not fine) or coarse


class TestTubeVolume:
    def test_point_disk(self):
        vol, se = st.tube_volume(np.zeros((1, 2)), 1.0,
                                 (np.full(2, -2.0), np.full(2, 2.0)),
                                 n_mc=40000, seed=0)
        assert abs(vol - np.pi) <= 3.0 * se

    def test_segment_tube_formula(self):
        length, r = 1.0, 0.05
        t = np.linspace(0, length, 400)
        seg = np.column_stack([t, np.zeros_like(t)])
        vol, se = st.tube_volume(seg, r, (np.array([-0.5, -0.5]),
                                          np.array([1.5, 0.5])),
                                 n_mc=120000, seed=1)
        expected = 2 * r * length + np.pi * r * r
        assert abs(vol - expected) <= max(3.0 * se, 0.02 * expected)

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            st.tube_volume(np.zeros((1, 2)), 1.0,
                           (np.full(2, -2.0), np.full(2, 2.0)), n_mc=100)


class TestContents:
    def test_single_point(self):
        ce = st.content_estimates(np.zeros((1, 2)), 0, 1.0, seed=0)
        assert ce.hausdorff == 1.0 and ce.packing == 1.0

    def test_segment_all_scale_like_length(self):
        t = np.linspace(0, 1, 600)
        seg = np.column_stack([t, np.zeros_like(t)])
        r = 0.02
        ce = st.content_estimates(seg, 1, r, n_mc=60000, seed=2)
        for val in (ce.hausdorff, ce.minkowski, ce.packing):
            assert val == pytest.approx(1.0, rel=0.2)

    def test_ordering_with_measured_constants(self):
        rng = np.random.default_rng(3)
        # middle-thirds dust: Hausdorff content strictly below Minkowski
        level = np.array([0.0])
        for _ in range(7):
            level = np.concatenate([level / 3.0, 2.0 / 3.0 + level / 3.0])
        dust = np.column_stack([level, np.zeros_like(level)])
        r = 1e-3
        ce = st.content_estimates(dust, 1, r, n_mc=50000, seed=4)
        assert ce.hausdorff <= 4.0 * ce.minkowski
        assert ce.minkowski <= 4.0 * ce.packing
        assert ce.hausdorff < 0.8 * ce.minkowski


class TestCovering:
    def test_plane_gives_empty_covering(self, flat_plane):
        samples = np.array([[0.0, 0, 0], [0.3, 0.2, 0]])
        tree = st.construct_covering(flat_plane, samples, 0, EPS, 1.0, 0.05)
        assert tree.rounds == 0 and tree.covered_all_samples

    def test_cone_termination_and_certificates(self, cone):
        samples = np.vstack([np.zeros(8)] +
                            [simons.smooth_point(t)
                             for t in np.linspace(0.05, 0.95, 19)])
        eta = 1.0
        tree = st.construct_covering(cone, samples, 0, EPS, eta, 2.0**-5)
        assert tree.rounds <= int(np.ceil(simons.VERTEX_DENSITY / eta))
        assert tree.covered_all_samples
        assert tree.certificates_ok()
        assert tree.u_r_count() >= 1
        assert tree.packing_sum() < 80.0

    def test_floor_ball_count_scaling(self, cone):
        # near-vertex floor balls stay order one across floor radii
        for r in (2.0**-4, 2.0**-6):
            samples = np.vstack([np.zeros(8)] +
                                [simons.smooth_point(t)
                                 for t in np.linspace(0.02, 0.9, 15)])
            tree = st.construct_covering(cone, samples, 0, EPS, 1.0, r)
            assert tree.u_r_count() <= 8


class TestGroups:
    def test_single_ball(self):
        groups = st.decompose_groups(np.zeros((1, 2)), np.array([1.0]))
        assert groups == [[0]]

    def test_far_equal_balls_share_group(self):
        centers = np.array([[0.0, 0], [20.0, 0], [0, 20.0], [20.0, 20]])
        groups = st.decompose_groups(centers, np.ones(4), 5.0)
        assert len(groups) == 1

    def test_concentric_dyadic_separate(self):
        count = 6
        centers = np.zeros((count, 2))
        radii = 2.0 ** -np.arange(count)
        groups = st.decompose_groups(centers, radii, 5.0)
        # consecutive dyadic radii violate the R^-2 drop, so no two
        # consecutive balls may share a group
        for g in groups:
            rs = sorted(radii[i] for i in g)
            for a, b in zip(rs, rs[1:]):
                assert a < b / 25.0 + 1e-15
        assert not st.group_property_violations(centers, radii, groups, 5.0)

    def test_random_systems_exhaustive(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            count = rng.integers(5, 40)
            centers = rng.uniform(-1, 1, (count, 2))
            radii = 10.0 ** rng.uniform(-3, -0.5, count)
            groups = st.decompose_groups(centers, radii, 5.0)
            assert not st.group_property_violations(centers, radii, groups, 5.0)
            assert len(groups) <= 40  # packing constant for R=5, n=2


class TestWeakLp:
    def test_flat_mesh_has_empty_tail(self, flat_plane):
        curve = st.weak_lp_curve(flat_plane, np.array([0.1, 0.2, 0.5]))
        assert np.all(curve.masses == 0.0)

    def test_cone_closed_form_slope(self, cone):
        radii = 2.0 ** -np.arange(4, 9)
        curve = st.weak_lp_curve(cone, radii)
        assert curve.slope == pytest.approx(7.0, abs=1e-9)
        assert curve.r2 > 0.999999

    def test_mesh_proxy_slope(self):
        mesh = simons.SimonsConeMesh("600cell", 2)
        curve = st.weak_lp_curve(mesh, 2.0 ** -np.arange(4, 9))
        assert curve.slope == pytest.approx(7.0, abs=0.1)

    def test_curvature_quantity(self, cone):
        curve = st.weak_lp_curve(cone, 2.0 ** -np.arange(5, 9),
                                 quantity="curvature")
        assert curve.slope == pytest.approx(7.0, abs=1e-6)

    def test_unsupported_kind(self, two_planes):
        with pytest.raises(ValueError):
            st.weak_lp_curve(two_planes, np.array([0.1, 0.2]))


def test_fit_loglog_recovers_power():
    x = np.array([1.0, 0.5, 0.25, 0.125])
    slope, _, r2 = st.fit_loglog(x, 3.0 * x**2.5)
    assert slope == pytest.approx(2.5)
    assert r2 == pytest.approx(1.0)
