"""Two-line element set parsing, validation and formatting."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable

from .errors import ChecksumMismatch, DeepSpaceRejected, FieldOutOfRange, TleError

# 1440 min/day / 225 min: slower than this is a deep-space orbit.
DEEP_SPACE_MEAN_MOTION = 6.4


@dataclass(frozen=True)
class OrbitalElements:
    catalog_id: int
    name: str
    epoch: datetime
    inclination: float  # deg
    raan: float  # deg
    eccentricity: float
    arg_perigee: float  # deg
    mean_anomaly: float  # deg
    mean_motion: float  # rev/day (Kozai mean motion, as in the TLE)
    bstar: float  # 1/earth radii
    ndot: float = 0.0  # rev/day^2 / 2
    nddot: float = 0.0  # rev/day^3 / 6
    line1_checksum_ok: bool = True
    line2_checksum_ok: bool = True

    @property
    def period_minutes(self) -> float:
        return 1440.0 / self.mean_motion


def tle_checksum(line: str) -> int:
    """Modulo-10 checksum over the first 68 columns; '-' counts as 1."""
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _check_line(line: str, line_no: int) -> bool:
    if len(line) < 69:
        raise TleError(f"line shorter than 69 columns ({len(line)})", line_no)
    found = line[68]
    expected = tle_checksum(line)
    if not found.isdigit() or int(found) != expected:
        raise ChecksumMismatch(line_no, expected, found)
    return True


def _implied_decimal(field: str) -> float:
    """Parse fields like ' 28098-4' -> 0.28098e-4 (leading decimal point implied)."""
    s = field.strip()
    if not s:
        return 0.0
    sign = -1.0 if s[0] == "-" else 1.0
    if s[0] in "+-":
        s = s[1:]
    mantissa, exp_sign, exponent = s[:-2], s[-2], s[-1]
    if exp_sign not in "+-" or not exponent.isdigit():
        mantissa, exp_sign, exponent = s, "+", "0"
    return sign * float("0." + mantissa.strip()) * 10.0 ** int(exp_sign + exponent)


def _float(field: str, name: str, line_no: int) -> float:
    try:
        return float(field)
    except ValueError:
        raise FieldOutOfRange(name, line_no, field.strip()) from None


def _epoch(year2: str, day: str, line_no: int) -> datetime:
    try:
        yy = int(year2)
        doy = float(day)
    except ValueError:
        raise FieldOutOfRange("epoch", line_no, year2 + day) from None
    year = 2000 + yy if yy < 57 else 1900 + yy
    if not 1.0 <= doy < 367.0:
        raise FieldOutOfRange("epoch", line_no, doy)
    return datetime(year, 1, 1, tzinfo=timezone.utc) + timedelta(days=doy - 1.0)


def parse_tle_lines(name: str | None, line1: str, line2: str, line_no: int = 1) -> OrbitalElements:
    """Parse one record.  ``line_no`` is the 1-based source line of ``line1``."""
    line1 = line1.rstrip("\r\n")
    line2 = line2.rstrip("\r\n")
    n2 = line_no + 1
    if not line1.startswith("1 "):
        raise TleError("expected line 1 of a TLE record", line_no)
    if not line2.startswith("2 "):
        raise TleError("expected line 2 of a TLE record", n2)
    ok1 = _check_line(line1, line_no)
    ok2 = _check_line(line2, n2)

    try:
        catalog_id = int(line1[2:7])
    except ValueError:
        raise FieldOutOfRange("catalog_id", line_no, line1[2:7]) from None
    if line2[2:7].strip() != line1[2:7].strip():
        raise FieldOutOfRange("catalog_id", n2, line2[2:7])

    epoch = _epoch(line1[18:20], line1[20:32], line_no)
    ndot = _float(line1[33:43], "ndot", line_no)
    try:
        nddot = _implied_decimal(line1[44:52])
        bstar = _implied_decimal(line1[53:61])
    except ValueError:
        raise FieldOutOfRange("bstar", line_no, line1[53:61]) from None

    inclination = _float(line2[8:16], "inclination", n2)
    raan = _float(line2[17:25], "raan", n2)
    ecc_field = line2[26:33].strip()
    if not ecc_field.isdigit():
        raise FieldOutOfRange("eccentricity", n2, ecc_field)
    eccentricity = float("0." + ecc_field)
    arg_perigee = _float(line2[34:42], "arg_perigee", n2)
    mean_anomaly = _float(line2[43:51], "mean_anomaly", n2)
    mean_motion = _float(line2[52:63], "mean_motion", n2)

    if not 0.0 <= inclination <= 180.0:
        raise FieldOutOfRange("inclination", n2, inclination)
    for field, value in (("raan", raan), ("arg_perigee", arg_perigee), ("mean_anomaly", mean_anomaly)):
        if not 0.0 <= value < 360.0:
            raise FieldOutOfRange(field, n2, value)
    if not 0.0 <= eccentricity < 1.0:
        raise FieldOutOfRange("eccentricity", n2, eccentricity)
    if not mean_motion > 0.0 or not math.isfinite(mean_motion):
        raise FieldOutOfRange("mean_motion", n2, mean_motion)
    if mean_motion <= DEEP_SPACE_MEAN_MOTION:
        raise DeepSpaceRejected(catalog_id, n2)

    name = (name or "").strip()
    if name.startswith("0 "):
        name = name[2:].strip()
    return OrbitalElements(
        catalog_id=catalog_id,
        name=name or f"SAT-{catalog_id}",
        epoch=epoch,
        inclination=inclination,
        raan=raan,
        eccentricity=eccentricity,
        arg_perigee=arg_perigee,
        mean_anomaly=mean_anomaly,
        mean_motion=mean_motion,
        bstar=bstar,
        ndot=ndot,
        nddot=nddot,
        line1_checksum_ok=ok1,
        line2_checksum_ok=ok2,
    )


def _text_lines(source: str | bytes | IO | Iterable[str]) -> list[str]:
    if isinstance(source, bytes):
        source = source.decode("ascii", errors="replace")
    if isinstance(source, str):
        source = io.StringIO(source)
    out = []
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("ascii", errors="replace")
        out.append(line.rstrip("\r\n"))
    return out


def parse_tle_records(source) -> tuple[list[OrbitalElements], list[TleError]]:
    """Parse 2-line and 3-line records, collecting errors instead of raising.

    A bad record is skipped and its error (with line number) is returned;
    parsing resumes at the next line that can start a record.
    """
    lines = _text_lines(source)
    records: list[OrbitalElements] = []
    errors: list[TleError] = []
    name: str | None = None
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if line.startswith("1 "):
            if i + 1 >= len(lines) or not lines[i + 1].startswith("2 "):
                errors.append(TleError("line 1 without a following line 2", i + 1))
                name = None
                i += 1
                continue
            try:
                records.append(parse_tle_lines(name, line, lines[i + 1], i + 1))
            except TleError as exc:
                errors.append(exc)
            name = None
            i += 2
        elif line.startswith("2 "):
            errors.append(TleError("line 2 without a preceding line 1", i + 1))
            name = None
            i += 1
        else:
            name = line
            i += 1
    return records, errors


def parse_tle_file(source) -> list[OrbitalElements]:
    """Parse a TLE source, raising the first error encountered."""
    records, errors = parse_tle_records(source)
    if errors:
        raise errors[0]
    return records


def read_tle(path) -> list[OrbitalElements]:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        return parse_tle_file(fh)


# -- formatting ------------------------------------------------------------------

def _exp_field(value: float) -> str:
    """Inverse of :func:`_implied_decimal`, 8 columns wide."""
    if value == 0.0:
        return " 00000-0"
    sign = "-" if value < 0 else " "
    exponent = math.floor(math.log10(abs(value))) + 1
    mantissa = round(abs(value) / 10.0 ** exponent * 1e5)
    if mantissa >= 100000:
        mantissa //= 10
        exponent += 1
    if mantissa == 0 or exponent < -9:  # below the field's resolution
        return " 00000-0"
    if exponent > 9:
        raise ValueError(f"{value!r} does not fit an 8-column exponent field")
    exp_sign = "-" if exponent < 0 else "+"
    return f"{sign}{mantissa:05d}{exp_sign}{abs(exponent)}"


def _with_checksum(body: str) -> str:
    body = body.ljust(68)[:68]
    return body + str(tle_checksum(body))


def format_tle(el: OrbitalElements, intl_designator: str = "", element_set: int = 999,
               rev_number: int = 0) -> tuple[str, str]:
    start = datetime(el.epoch.year, 1, 1, tzinfo=timezone.utc)
    doy = (el.epoch - start).total_seconds() / 86400.0 + 1.0
    ndot = f"{el.ndot:.8f}".replace("0.", ".", 1)
    if el.ndot >= 0:
        ndot = " " + ndot
    line1 = (
        f"1 {el.catalog_id:05d}U {intl_designator:<8} {el.epoch.year % 100:02d}{doy:012.8f} "
        f"{ndot:>10} {_exp_field(el.nddot)} {_exp_field(el.bstar)} 0 {element_set % 10000:4d}"
    )
    ecc = f"{el.eccentricity:.7f}"[2:]
    line2 = (
        f"2 {el.catalog_id:05d} {el.inclination:8.4f} {el.raan:8.4f} {ecc} "
        f"{el.arg_perigee:8.4f} {el.mean_anomaly:8.4f} {el.mean_motion:11.8f}{rev_number % 100000:5d}"
    )
    return _with_checksum(line1), _with_checksum(line2)


def write_tle(records: Iterable[OrbitalElements], fh: IO[str]) -> None:
    for el in records:
        l1, l2 = format_tle(el)
        fh.write(f"{el.name}\n{l1}\n{l2}\n")
