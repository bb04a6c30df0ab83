import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from graphcusum.filtering import StreamConfig, dominant_subspace_of, stream_matrix, synthesize_stream
from graphcusum.graphs import barabasi_albert, shift_operator
from graphcusum.subspace import (
    DegenerateBlockError,
    DegenerateSpectrumWarning,
    FamilyKind,
    SignalBlock,
    Subspace,
    SubspaceFamily,
    SubspaceFormatError,
    estimate_dominant_subspace,
    nearest_family_member,
    one_hot,
    principal_angles,
    read_subspace_csv,
    sample_covariance,
    sin_theta_distance,
    sin_theta_distance_gram,
    write_subspace_csv,
)


def random_subspace(rng, n, k):
    return Subspace.from_columns(rng.standard_normal((n, k)))


def random_orthogonal(rng, k):
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))


@st.composite
def subspace_pairs(draw, max_n=50, max_k=5):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, min(n, max_k)))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return rng, random_subspace(rng, n, k), random_subspace(rng, n, k)


class TestSubspace:
    def test_from_vector_normalizes(self):
        np.testing.assert_allclose(Subspace.from_vector([3.0, 4.0]).basis[:, 0], [0.6, 0.8])

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError):
            Subspace.from_vector([0.0, 0.0])

    def test_rejects_k_gt_n(self):
        with pytest.raises(ValueError):
            Subspace(np.eye(3)[:2, :].T.T)


class TestSampleCovariance:
    def test_rank_one(self):
        np.testing.assert_array_equal(sample_covariance(SignalBlock(np.array([[1.0, 2.0]]))), [[1, 2], [2, 4]])

    def test_zero_block(self):
        np.testing.assert_array_equal(sample_covariance(SignalBlock(np.zeros((3, 2)))), np.zeros((2, 2)))

    def test_uncentered(self):
        Y = np.array([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_array_equal(sample_covariance(SignalBlock(Y)), np.ones((2, 2)))


class TestEstimateDominantSubspace:
    def test_single_signal(self):
        u = estimate_dominant_subspace(SignalBlock(np.array([[3.0, 4.0]])), 1)
        np.testing.assert_allclose(u.basis[:, 0], [0.6, 0.8], atol=1e-15)

    def test_diagonal_covariance(self):
        Y = np.diag(np.sqrt([5.0, 2.0, 1.0])) * math.sqrt(3)
        u = estimate_dominant_subspace(SignalBlock(Y), 2)
        assert sin_theta_distance(u, Subspace(np.eye(3)[:, :2])) < 1e-12

    def test_zero_block_raises(self):
        with pytest.raises(DegenerateBlockError):
            estimate_dominant_subspace(SignalBlock(np.zeros((4, 3))), 1)

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 40), seed=st.integers(0, 2**31))
    def test_shortcut_is_exact(self, n, seed):
        y = np.random.default_rng(seed).standard_normal(n)
        u = estimate_dominant_subspace(SignalBlock(y[None, :]), 1)
        np.testing.assert_array_equal(u.basis[:, 0], y / np.linalg.norm(y))

    @pytest.mark.parametrize("seed", range(5))
    def test_ba_block_recovers_top_eigenspace(self, seed):
        # a tree is bipartite, so +-lambda_max share h = lambda^2 and the top
        # eigenspace of the covariance is a plane; the estimate must lie in it
        S = shift_operator(barabasi_albert(100, 1, seed=seed))
        with pytest.warns(DegenerateSpectrumWarning):
            dominant_subspace_of((0, 0, 1), S, 1)
        plane = dominant_subspace_of((0, 0, 1), S, 2)
        Y = stream_matrix(synthesize_stream(StreamConfig(S, S, (0, 0, 1), (0, 0, 1), 1, 2000, seed + 8)))
        v = estimate_dominant_subspace(SignalBlock(Y), 1).basis[:, 0]
        assert np.linalg.norm(v - plane.basis @ (plane.basis.T @ v)) < 0.3
        assert sin_theta_distance(estimate_dominant_subspace(SignalBlock(Y), 2), plane) < 0.3


class TestDistance:
    def test_identical(self):
        rng = np.random.default_rng(0)
        u = random_subspace(rng, 10, 3)
        v = Subspace(u.basis @ random_orthogonal(rng, 3))
        assert sin_theta_distance(u, v) < 1e-12

    def test_orthogonal_lines(self):
        assert sin_theta_distance(one_hot(2, 0), one_hot(2, 1)) == 1.0

    def test_45_degrees(self):
        d = sin_theta_distance(one_hot(2, 0), Subspace.from_vector([1.0, 1.0]))
        assert d == pytest.approx(0.70710678, abs=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sin_theta_distance(one_hot(3, 0), one_hot(4, 0))

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs())
    def test_matches_scipy_angles(self, pair):
        _, u, v = pair
        theta = scipy.linalg.subspace_angles(u.basis, v.basis)
        expected = math.sqrt(float(np.sum(np.sin(theta) ** 2)))
        assert sin_theta_distance(u, v) == pytest.approx(expected, abs=1e-10)
        np.testing.assert_allclose(np.sort(principal_angles(u, v)), np.sort(theta), atol=1e-7)

    @settings(max_examples=200, deadline=None)
    @given(subspace_pairs())
    def test_metric_sanity(self, pair):
        _, u, v = pair
        d = sin_theta_distance(u, v)
        assert d == pytest.approx(sin_theta_distance(v, u), abs=1e-12)
        assert 0.0 <= d <= math.sqrt(u.k)
        assert sin_theta_distance(u, u) < 1e-12
        same_span = np.linalg.norm(u.projector() - v.projector()) < 1e-9
        assert same_span == (d < 1e-9)

    def test_gram_form_loses_precision_near_zero(self):
        # residual form stays accurate for tiny angles, the literal Gram form cannot
        eps = 1e-9
        u, v = one_hot(2, 0), Subspace.from_vector([1.0, eps])
        assert sin_theta_distance(u, v) == pytest.approx(eps, rel=1e-6)
        assert sin_theta_distance_gram(u, v) < 1e-7


class TestFamilies:
    def test_spike_requires_k1(self):
        with pytest.raises(ValueError):
            SubspaceFamily.delta_spike().check_compatible(Subspace(np.eye(3)[:, :2]))

    def test_catalog_shapes_must_agree(self):
        with pytest.raises(ValueError):
            SubspaceFamily.catalog([one_hot(3, 0), Subspace(np.eye(3)[:, :2])])

    def test_blind(self):
        u0 = one_hot(3, 0)
        v = Subspace.from_vector([1.0, 1.0, 0.0])
        m = nearest_family_member(SubspaceFamily.blind(), v, u0)
        assert m.gamma is None and m.d_vhat_u1 == 0.0
        assert m.d_u0_u1 == pytest.approx(sin_theta_distance(u0, v), abs=0)

    def test_spike_closed_form(self):
        u0 = Subspace.from_vector(np.ones(3))
        m = nearest_family_member(SubspaceFamily.delta_spike(), Subspace.from_vector([0.6, 0.8, 0.0]), u0)
        assert m.gamma == 1  # 0-based; second coordinate
        assert m.d_vhat_u1 == pytest.approx(0.6, abs=1e-15)

    def test_spike_flat_u0(self):
        u0 = Subspace.from_vector(np.ones(100))
        v = np.zeros(100)
        v[:2] = [0.6, 0.8]
        m = nearest_family_member(SubspaceFamily.delta_spike(), Subspace.from_vector(v), u0)
        assert m.d_u0_u1 == pytest.approx(math.sqrt(0.99), abs=1e-12)
        assert m.d_u0_u1 == pytest.approx(0.99499, abs=1e-5)

    def test_spike_matches_onehot_catalog(self):
        rng = np.random.default_rng(42)
        n = 100
        catalog = SubspaceFamily.catalog([one_hot(n, i) for i in range(n)])
        u0 = Subspace.from_vector(rng.standard_normal(n))
        for _ in range(100):
            v = Subspace.from_vector(rng.standard_normal(n))
            a = nearest_family_member(SubspaceFamily.delta_spike(), v, u0)
            b = nearest_family_member(catalog, v, u0)
            assert a.gamma == b.gamma
            assert abs(a.d_vhat_u1 - b.d_vhat_u1) < 1e-12
            assert abs(a.d_u0_u1 - b.d_u0_u1) < 1e-12

    def test_catalog_brute_force(self):
        rng = np.random.default_rng(3)
        members = [random_subspace(rng, 30, 2) for _ in range(50)]
        family = SubspaceFamily.catalog([(f"g{i}", m) for i, m in enumerate(members)])
        u0 = random_subspace(rng, 30, 2)
        for _ in range(20):
            v = random_subspace(rng, 30, 2)
            dists = [sin_theta_distance(m, v) for m in members]
            best = min(range(50), key=lambda i: (dists[i], i))
            got = nearest_family_member(family, v, u0)
            assert got.gamma == f"g{best}"
            assert got.d_vhat_u1 == dists[best]
            assert got.d_u0_u1 == sin_theta_distance(u0, members[best])

    def test_catalog_tie_breaks_low(self):
        e0 = one_hot(3, 0)
        family = SubspaceFamily.catalog([("a", one_hot(3, 1)), ("b", one_hot(3, 2)), ("c", one_hot(3, 1))])
        assert nearest_family_member(family, e0, e0).gamma == "a"

    def test_family_kinds(self):
        assert SubspaceFamily.blind().kind is FamilyKind.BLIND
        assert SubspaceFamily.delta_spike().name == "spike"


class TestSubspaceCSV:
    def test_roundtrip(self, tmp_path):
        u = random_subspace(np.random.default_rng(1), 12, 3)
        write_subspace_csv(u, tmp_path / "u.csv")
        assert (tmp_path / "u.csv").read_text().startswith("# n=12 k=3\n")
        np.testing.assert_array_equal(read_subspace_csv(tmp_path / "u.csv").basis, u.basis)

    def test_bad_cell(self, tmp_path):
        (tmp_path / "u.csv").write_text("# n=2 k=1\n1\nx\n")
        with pytest.raises(SubspaceFormatError, match=":3:"):
            read_subspace_csv(tmp_path / "u.csv")

    def test_header_mismatch(self, tmp_path):
        (tmp_path / "u.csv").write_text("# n=3 k=1\n1\n0\n")
        with pytest.raises(SubspaceFormatError):
            read_subspace_csv(tmp_path / "u.csv")
