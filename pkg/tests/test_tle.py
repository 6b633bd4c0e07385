from __future__ import annotations

import io
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from spaceuser.errors import ChecksumMismatch, DeepSpaceRejected, FieldOutOfRange, TleError
from spaceuser.tle import (
    OrbitalElements,
    format_tle,
    parse_tle_file,
    parse_tle_lines,
    parse_tle_records,
    tle_checksum,
    write_tle,
)

from conftest import bundled

# Hand-built record for a 53 deg, ~550 km satellite (15.06 rev/day).  The
# checksum digits below were computed by hand and cross-checked with
# independent_checksum().
L1 = "1 44713U 19074A   25060.00000000  .00001000  00000-0  72000-4 0  9990"
L2 = "2 44713  53.0540 210.0000 0001400  90.0000 270.0000 15.06400000 28007"


def independent_checksum(line: str) -> int:
    digits = sum(int(c) for c in line[:68] if c.isdigit())
    minus = line[:68].count("-")
    return (digits + minus) % 10


def with_checksum(body: str) -> str:
    return body[:68] + str(independent_checksum(body))


def test_hand_built_record():
    l1, l2 = with_checksum(L1), with_checksum(L2)
    el = parse_tle_lines(None, l1, l2)
    assert el.catalog_id == 44713
    assert el.inclination == pytest.approx(53.054)
    assert el.mean_motion == pytest.approx(15.064)
    assert el.eccentricity == pytest.approx(0.00014)
    assert el.bstar == pytest.approx(7.2e-5)
    assert el.epoch == datetime(2025, 3, 1, tzinfo=timezone.utc)
    assert el.line1_checksum_ok and el.line2_checksum_ok
    assert el.name == "SAT-44713"


def test_checksum_matches_independent_implementation():
    for sat in bundled("relays_1000.tle")[:50]:
        l1, l2 = format_tle(sat)
        assert tle_checksum(l1) == independent_checksum(l1) == int(l1[68])
        assert tle_checksum(l2) == independent_checksum(l2) == int(l2[68])


def test_line1_checksum_bumped():
    l1, l2 = with_checksum(L1), with_checksum(L2)
    bad = l1[:68] + str((int(l1[68]) + 1) % 10)
    with pytest.raises(ChecksumMismatch) as info:
        parse_tle_file(f"{bad}\n{l2}\n")
    assert info.value.line_no == 1


def test_empty_input():
    assert parse_tle_records("") == ([], [])
    assert parse_tle_file(b"") == []


def test_three_line_and_two_line_records():
    l1, l2 = with_checksum(L1), with_checksum(L2)
    text = f"0 STARLINK-1007\n{l1}\n{l2}\n{l1}\n{l2}\n"
    recs = parse_tle_file(io.StringIO(text))
    assert [r.name for r in recs] == ["STARLINK-1007", "SAT-44713"]


def test_errors_carry_line_numbers_and_parsing_continues():
    l1, l2 = with_checksum(L1), with_checksum(L2)
    bad2 = l2[:68] + str((int(l2[68]) + 3) % 10)
    text = f"GOOD\n{l1}\n{l2}\nBAD\n{l1}\n{bad2}\nGOOD2\n{l1}\n{l2}\n"
    recs, errs = parse_tle_records(text)
    assert len(recs) == 2
    assert len(errs) == 1 and isinstance(errs[0], ChecksumMismatch) and errs[0].line_no == 6


def test_deep_space_rejected():
    body = L2[:52] + " 2.00491383" + L2[63:]
    with pytest.raises(DeepSpaceRejected) as info:
        parse_tle_lines("MOLNIYA", with_checksum(L1), with_checksum(body))
    assert info.value.catalog_id == 44713


@pytest.mark.parametrize("cols,value,field", [
    ((8, 16), "181.0000", "inclination"),
    ((17, 25), "360.0000", "raan"),
    ((43, 51), "400.0000", "mean_anomaly"),
])
def test_field_out_of_range(cols, value, field):
    a, b = cols
    body = L2[:a] + value.rjust(b - a) + L2[b:]
    with pytest.raises(FieldOutOfRange) as info:
        parse_tle_lines(None, with_checksum(L1), with_checksum(body), line_no=10)
    assert info.value.field == field and info.value.line_no == 11


def test_short_line_rejected():
    with pytest.raises(TleError):
        parse_tle_lines(None, with_checksum(L1)[:60], with_checksum(L2))


def test_round_trip_bundled():
    sats = bundled("eo_fleet.tle")
    buf = io.StringIO()
    write_tle(sats, buf)
    again = parse_tle_file(buf.getvalue())
    assert again == list(sats)


@settings(max_examples=200, deadline=None)
@given(
    inc=st.floats(0.0, 180.0), raan=st.floats(0.0, 359.9999), ecc=st.floats(0.0, 0.9999),
    argp=st.floats(0.0, 359.9999), ma=st.floats(0.0, 359.9999), n=st.floats(6.5, 16.9),
    bstar=st.floats(-9e-3, 9e-3), day=st.floats(1.0, 365.0),
)
def test_format_parse_round_trip(inc, raan, ecc, argp, ma, n, bstar, day):
    from datetime import timedelta
    epoch = datetime(2025, 1, 1, tzinfo=timezone.utc) + timedelta(days=round(day - 1, 8))
    el = OrbitalElements(12345, "X", epoch, round(inc, 4), round(raan, 4), round(ecc, 7), round(argp, 4),
                         round(ma, 4), round(n, 8), bstar)
    l1, l2 = format_tle(el)
    assert len(l1) == len(l2) == 69
    back = parse_tle_lines("X", l1, l2)
    assert back.inclination == pytest.approx(el.inclination, abs=1e-4)
    assert back.raan == pytest.approx(el.raan, abs=1e-4) or abs(back.raan - el.raan) > 359
    assert back.eccentricity == pytest.approx(el.eccentricity, abs=1e-7)
    assert back.mean_motion == pytest.approx(el.mean_motion, abs=1e-8)
    assert back.bstar == pytest.approx(el.bstar, rel=1e-4, abs=1e-9)
    assert abs((back.epoch - el.epoch).total_seconds()) < 1e-3


def test_any_single_digit_flip_rejected():
    l1, l2 = with_checksum(L1), with_checksum(L2)
    for line_idx, line in enumerate((l1, l2)):
        for col, ch in enumerate(line[:69]):
            if not ch.isdigit():
                continue
            for d in "0123456789":
                if d == ch:
                    continue
                bad = line[:col] + d + line[col + 1:]
                pair = (bad, l2) if line_idx == 0 else (l1, bad)
                with pytest.raises(TleError):
                    parse_tle_lines(None, *pair)
