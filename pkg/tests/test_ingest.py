import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gvcmarkov.core import validate
from gvcmarkov.ingest import (CANONICAL_HEADER, ParseError, SyntheticSpec, WiodColumns,
                              chain_example, constant_row_sum_economy, parse_canonical_csv,
                              parse_wiot_long, random_economy, write_canonical_csv,
                              write_wiot_long)
from gvcmarkov.networks import build_output_network
from gvcmarkov.spectral import spectral_radius

HEADER = ",".join(CANONICAL_HEADER) + "\n"

# the three-country chain flows written by hand, p = q = 0.3
FIG1_RECORDS = HEADER + """\
intermediate,C1,I,C2,I,0.3
intermediate,C2,I,C1,I,0.3
intermediate,C2,I,C3,I,0.3
intermediate,C3,I,C2,I,0.3
final,C1,I,C1,,0.7
final,C2,I,C2,,0.4
final,C3,I,C3,,0.7
final,C1,I,C2,,0
final,C3,I,C1,,0
"""


def roundtrip(e, writer, reader, **kw):
    buf = io.StringIO()
    writer(e, buf, **kw)
    buf.seek(0)
    return reader(buf)


class TestCanonical:
    def test_chain3_by_hand(self):
        e = parse_canonical_csv(FIG1_RECORDS)
        np.testing.assert_allclose(e.x, [1, 1, 1], atol=1e-15)
        assert e.labels.countries == ("C1", "C2", "C3")
        np.testing.assert_allclose(e.Z, chain_example(0.3, 0.3).Z)
        assert e.report.passed

    def test_duplicates_accumulate(self):
        text = HEADER + ("intermediate,A,x,A,y,2\nintermediate,A,x,A,y,3\n"
                         "final,A,x,A,,1\nfinal,A,y,A,,1\n")
        e = parse_canonical_csv(text)
        assert e.Z[0, 1] == 5.0

    def test_final_with_dest_sector(self):
        text = HEADER + "intermediate,A,x,A,x,1\nfinal,A,x,A,x,1\n"
        with pytest.raises(ParseError) as err:
            parse_canonical_csv(text)
        assert err.value.line == 3

    def test_empty_file(self):
        with pytest.raises(ParseError):
            parse_canonical_csv("")

    def test_bad_header(self):
        with pytest.raises(ParseError):
            parse_canonical_csv("a,b,c\n")

    def test_bad_number(self):
        with pytest.raises(ParseError) as err:
            parse_canonical_csv(HEADER + "final,A,x,A,,abc\n")
        assert err.value.line == 2

    def test_undeclared_code(self):
        text = HEADER + "country,A,,,,\nsector,,x,,,\nfinal,B,x,A,,1\n"
        with pytest.raises(ParseError) as err:
            parse_canonical_csv(text)
        assert err.value.line == 4

    def test_declaration_after_flow(self):
        text = HEADER + "final,A,x,A,,1\ncountry,A,,,,\n"
        with pytest.raises(ParseError):
            parse_canonical_csv(text)

    def test_wrong_field_count(self):
        with pytest.raises(ParseError):
            parse_canonical_csv(HEADER + "final,A,x,A,1\n")

    def test_reported_totals_checked(self):
        text = HEADER + "final,A,x,A,,1\noutput,A,x,,,1.5\n"
        e = parse_canonical_csv(text)
        assert not e.report.passed
        assert e.x[0] == 1.0

    def test_negative_final_clamped(self):
        text = HEADER + "final,A,x,A,,2\nfinal,A,x,B,,-0.5\nfinal,B,x,B,,1\n"
        e = parse_canonical_csv(text)
        assert e.clamp_count == 1
        assert e.report.clamp_count == 1
        assert e.report.clamped_mass == pytest.approx(0.5)

    def test_inactive_node_dropped(self):
        text = HEADER + "final,A,x,A,,2\nfinal,A,y,A,,0\n"
        e = parse_canonical_csv(text)
        np.testing.assert_array_equal(e.node_map, [0])

    def test_roundtrip_with_dropped_node(self):
        text = HEADER + "intermediate,A,x,A,x,0.5\nfinal,A,x,A,,2\nfinal,A,y,A,,0\n"
        e = parse_canonical_csv(text)
        back = roundtrip(e, write_canonical_csv, parse_canonical_csv)
        np.testing.assert_array_equal(back.node_map, [0])
        np.testing.assert_allclose(back.Z, e.Z)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([0.3, 1.0]),
           st.integers(0, 10**6))
    def test_roundtrip_property(self, J, S, density, seed):
        e = random_economy(SyntheticSpec(J, S, density, None, seed, year=2003))
        back = roundtrip(e, write_canonical_csv, parse_canonical_csv)
        assert back.year == 2003
        assert back.labels == e.labels
        for a, b in ((e.Z, back.Z), (e.F, back.F), (e.x, back.x), (e.w, back.w)):
            np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-12)
        assert back.report.passed


class TestWiod:
    def test_roundtrip(self, small_economy):
        back = roundtrip(small_economy, write_wiot_long, parse_wiot_long)
        np.testing.assert_allclose(back.Z, small_economy.Z, rtol=1e-9)
        np.testing.assert_allclose(back.F, small_economy.F, rtol=1e-9)
        assert back.report.passed

    def test_fd_split_sums(self, chain3):
        split = dict(zip(WiodColumns().fd_categories, [0.2, 0.3, 0.1, 0.25, 0.15]))
        buf = io.StringIO()
        write_wiot_long(chain3, buf, fd_split=split)
        buf.seek(0)
        e = parse_wiot_long(buf)
        np.testing.assert_allclose(e.F, chain3.F, atol=1e-12)

    def test_rounding_noise_passes_ingest_tolerance(self, small_economy):
        back = roundtrip(small_economy, write_wiot_long, parse_wiot_long, digits=6)
        assert back.report.passed
        assert validate(back).passed

    def test_unknown_use_category(self):
        text = ("Year,Country,RNr,ColCountry,ColItem,Value\n"
                "2000,A,x,A,x,1\n2000,A,x,A,BOGUS,1\n")
        with pytest.raises(ParseError):
            parse_wiot_long(text)

    def test_inconsistent_countries(self):
        text = ("Year,Country,RNr,ColCountry,ColItem,Value\n"
                "2000,A,x,A,x,1\n2000,A,x,B,CONS_h,1\n")
        with pytest.raises(ParseError):
            parse_wiot_long(text)

    def test_column_map(self, chain3):
        cfg = "year = yr\nrow_country = rc\nvalue = v # comment\n"
        cols = WiodColumns.from_config(cfg)
        assert cols.year == "yr" and cols.row_item == "RNr"
        buf = io.StringIO()
        write_wiot_long(chain3, buf, columns=cols)
        assert buf.getvalue().startswith("yr,rc,RNr")
        buf.seek(0)
        np.testing.assert_allclose(parse_wiot_long(buf, columns=cols).Z, chain3.Z)

    def test_column_map_unknown_key(self):
        with pytest.raises(ParseError):
            WiodColumns.from_config("colour = red\n")

    def test_wiod_scale_node_count(self):
        # 44 regions x 56 sectors written sparsely through the long format
        countries = [f"K{k:02d}" for k in range(44)]
        sectors = [f"r{k:02d}" for k in range(56)]
        lines = ["Year,Country,RNr,ColCountry,ColItem,Value"]
        for c in countries:
            for s in sectors:
                lines.append(f"2010,{c},{s},{c},{s},1")
                lines.append(f"2010,{c},{s},{c},CONS_h,2")
        e = parse_wiot_long("\n".join(lines) + "\n")
        assert e.n == 2464
        assert e.year == 2010


class TestChainExample:
    def test_construction(self, chain3):
        out = build_output_network(chain3)
        np.testing.assert_allclose(out.B.sum(axis=1), [0.3, 0.6, 0.3])
        np.testing.assert_allclose(out.gamma, [0.7, 0.4, 0.7])

    @pytest.mark.parametrize("p,q", [(0.1, 0.2), (0.3, 0.3), (0.45, 0.05)])
    def test_eigenvalue(self, p, q):
        B = build_output_network(chain_example(p, q)).B
        assert spectral_radius(B) == pytest.approx(np.sqrt(2 * p * q), abs=1e-12)

    @pytest.mark.parametrize("p,q", [(0.5, 0.5), (0.0, 0.3), (0.6, 0.5)])
    def test_rejected(self, p, q):
        with pytest.raises(ValueError):
            chain_example(p, q)

    def test_identities_exact(self, chain3):
        assert validate(chain3, 0.0).passed


class TestRandomEconomy:
    def test_deterministic(self):
        spec = SyntheticSpec(J=3, S=4, density=0.5, seed=7)
        a, b = random_economy(spec), random_economy(spec)
        np.testing.assert_array_equal(a.Z, b.Z)
        np.testing.assert_array_equal(a.F, b.F)

    @pytest.mark.parametrize("target,density", [(0.95, 0.5), (0.999, 1.0), (0.05, 0.3)])
    def test_spectral_target(self, target, density):
        e = random_economy(SyntheticSpec(3, 4, density, target, seed=1))
        lam = spectral_radius(build_output_network(e).B)
        assert abs(lam - target) <= 1e-3

    def test_validates_tightly(self, small_economy):
        assert validate(small_economy, 1e-12).passed

    def test_positive_final_use(self, small_economy):
        assert (small_economy.f > 0).all()

    @pytest.mark.parametrize("kw", [dict(J=0, S=1), dict(J=1, S=1, density=0.0),
                                    dict(J=1, S=1, spectral_target=1.0)])
    def test_spec_invariants(self, kw):
        with pytest.raises(ValueError):
            SyntheticSpec(**kw)

    @pytest.mark.parametrize("side", ["output", "input"])
    def test_constant_row_sums(self, side):
        from gvcmarkov.networks import build_input_network
        e = constant_row_sum_economy(2, 3, 0.4, seed=3, side=side)
        if side == "output":
            rows = build_output_network(e).B.sum(axis=1)
        else:
            rows = build_input_network(e).A.sum(axis=0)
        np.testing.assert_allclose(rows, 0.4, atol=1e-13)
