import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gvcmarkov.core import (EconomyError, Labels, flat_index, from_components, sanitize,
                            unflatten, validate, with_reported_totals)


class TestIndexing:
    def test_first_node(self):
        assert flat_index(1, 1, 3, 4) == 1

    def test_second_country_with_56_sectors(self):
        assert flat_index(2, 1, 44, 56) == 57

    def test_bijection_small(self):
        J, S = 3, 4
        flats = [flat_index(c, s, J, S) for c in range(1, J + 1) for s in range(1, S + 1)]
        assert sorted(flats) == list(range(1, J * S + 1))
        for c in range(1, J + 1):
            for s in range(1, S + 1):
                assert unflatten(flat_index(c, s, J, S), J, S) == (c, s)

    @pytest.mark.parametrize("c,s", [(0, 1), (4, 1), (1, 0), (1, 5)])
    def test_out_of_range(self, c, s):
        with pytest.raises(IndexError):
            flat_index(c, s, 3, 4)

    def test_unflatten_out_of_range(self):
        with pytest.raises(IndexError):
            unflatten(13, 3, 4)

    @given(st.integers(1, 9), st.integers(1, 9), st.data())
    def test_roundtrip_property(self, J, S, data):
        flat = data.draw(st.integers(1, J * S))
        c, s = unflatten(flat, J, S)
        assert flat_index(c, s, J, S) == flat

    def test_labels_methods(self):
        lab = Labels(("A", "B"), ("x", "y", "z"))
        assert lab.n == 6
        assert lab.flat_index(2, 3) == 6
        assert lab.node_labels()[3] == "B_x"
        np.testing.assert_array_equal(lab.country_of_node(), [0, 0, 0, 1, 1, 1])


class TestLabels:
    def test_duplicates_rejected(self):
        with pytest.raises(EconomyError):
            Labels(("A", "A"), ("x",))

    def test_empty_rejected(self):
        with pytest.raises(EconomyError):
            Labels((), ("x",))


class TestFromComponents:
    def test_chain3_identities(self, chain3):
        np.testing.assert_allclose(chain3.x, [1, 1, 1], atol=1e-15)
        assert chain3.w[1] == pytest.approx(0.4, abs=1e-15)

    def test_no_intermediates(self):
        lab = Labels(("A", "B"), ("x",))
        e = from_components(lab, np.zeros((2, 2)), np.array([[0.25, 0.75], [1.0, 0.0]]))
        np.testing.assert_array_equal(e.x, [1, 1])
        np.testing.assert_array_equal(e.w, [1, 1])
        np.testing.assert_array_equal(e.f, [1, 1])

    def test_shape_mismatch(self):
        lab = Labels(("A", "B", "C"), ("x",))
        with pytest.raises(EconomyError):
            from_components(lab, np.zeros((3, 3)), np.ones((4, 3)))

    def test_negative_z_rejected(self):
        lab = Labels(("A",), ("x", "y"))
        with pytest.raises(EconomyError):
            from_components(lab, [[0, -1], [0, 0]], [[1], [1]])

    def test_negative_output_rejected(self):
        lab = Labels(("A",), ("x", "y"))
        with pytest.raises(EconomyError):
            from_components(lab, [[0, 1], [0, 0]], [[-2], [1]])

    def test_arrays_frozen(self, chain3):
        with pytest.raises(ValueError):
            chain3.Z[0, 0] = 1.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_identities_hold_exactly(self, J, S, seed):
        rng = np.random.default_rng(seed)
        n = J * S
        e = from_components(Labels([f"c{i}" for i in range(J)], [f"s{i}" for i in range(S)]),
                            rng.random((n, n)), rng.random((n, J)))
        np.testing.assert_allclose(e.x, e.Z.sum(1) + e.F.sum(1), rtol=0, atol=1e-14 * n)
        assert validate(e, 0.0).passed


class TestValidate:
    def test_derived_is_exact(self, small_economy):
        rep = validate(small_economy)
        assert rep.passed
        assert rep.abs_output.max() == 0.0

    def test_perturbed_output_flagged(self, chain3):
        x = np.array(chain3.x)
        x[0] *= 1.01
        rep = validate(with_reported_totals(chain3, x, chain3.w), 1e-4)
        assert rep.flagged == [0]
        assert rep.rel_output[0] == pytest.approx(0.01 / 1.01, rel=1e-12)
        assert not rep.to_dict()["passed"]
        assert rep.to_dict()["flagged"][0]["node"] == "C1_I"


class TestSanitize:
    def test_clamps_negative_final_use(self):
        lab = Labels(("A", "B"), ("x",))
        e = sanitize(lab, np.array([[0.0, 1.0], [1.0, 0.0]]),
                     np.array([[2.0, -0.5], [1.0, 1.0]]))
        assert e.clamp_count == 1
        assert e.clamped_mass == pytest.approx(0.5)
        np.testing.assert_allclose(e.x, [3.0, 3.0])
        assert e.node_map is None

    def test_drops_inactive_cascade(self):
        # node 3 has zero output; removing it makes nothing else inactive
        lab = Labels(("A",), ("x", "y", "z"))
        Z = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        F = np.array([[1.0], [1.0], [0.0]])
        e = sanitize(lab, Z, F)
        np.testing.assert_array_equal(e.node_map, [0, 1])
        assert e.n == 2
        np.testing.assert_allclose(e.x, [2.0, 2.0])

    def test_all_inactive(self):
        lab = Labels(("A",), ("x",))
        with pytest.raises(EconomyError):
            sanitize(lab, np.zeros((1, 1)), np.zeros((1, 1)))

    def test_scaled(self, small_economy):
        s = small_economy.scaled(1e3)
        np.testing.assert_allclose(s.x, small_economy.x * 1e3)
        assert s.labels == small_economy.labels
