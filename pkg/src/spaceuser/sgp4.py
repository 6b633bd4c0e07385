"""Near-Earth SGP4, vectorized over satellites with numpy.

Follows the revised AFSPC formulation (Vallado et al. 2006) for the
near-Earth branch only; deep-space elements are rejected at construction.
Positions are km and velocities km/s in the TEME frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import DeepSpaceRejected, EpochTooFar, PropagationDiverged
from .tle import OrbitalElements

TWOPI = 2.0 * np.pi
X2O3 = 2.0 / 3.0
EPOCH_GUARD_DAYS = 7.0

ERROR_MESSAGES = {
    1: "mean eccentricity out of range",
    2: "mean motion <= 0",
    4: "semilatus rectum < 0",
    6: "satellite has decayed",
}


@dataclass(frozen=True)
class GravityModel:
    name: str
    mu: float  # km^3/s^2
    radius: float  # km
    xke: float
    j2: float
    j3: float
    j4: float

    @property
    def j3oj2(self) -> float:
        return self.j3 / self.j2

    @property
    def tumin(self) -> float:
        return 1.0 / self.xke


def _model(name, mu, radius, j2, j3, j4, xke=None):
    if xke is None:
        xke = 60.0 / np.sqrt(radius ** 3 / mu)
    return GravityModel(name, mu, radius, xke, j2, j3, j4)


GRAVITY_MODELS = {
    "wgs72old": _model("wgs72old", 398600.79964, 6378.135, 0.001082616, -0.00000253881,
                       -0.00000165597, xke=0.0743669161),
    "wgs72": _model("wgs72", 398600.8, 6378.135, 0.001082616, -0.00000253881, -0.00000165597),
    "wgs84": _model("wgs84", 398600.5, 6378.137, 0.00108262998905, -0.00000253215306,
                    -0.00000161098761),
}


class Sgp4Batch:
    """Initialized SGP4 state for a batch of element sets.

    >>> batch = Sgp4Batch(records)
    >>> r, v, err = batch.propagate_minutes(0.0)
    """

    def __init__(self, elements: Sequence[OrbitalElements], gravity: str = "wgs72"):
        self.elements = list(elements)
        self.gravity = GRAVITY_MODELS[gravity]
        self.catalog_ids = np.array([e.catalog_id for e in self.elements], dtype=np.int64)
        self.epochs = [e.epoch for e in self.elements]
        self._init()

    def __len__(self):
        return len(self.elements)

    def _init(self):
        g = self.gravity
        els = self.elements
        deg = np.pi / 180.0
        xpdotp = 1440.0 / TWOPI
        self.bstar = np.array([e.bstar for e in els], dtype=float)
        self.ecco = np.array([e.eccentricity for e in els], dtype=float)
        self.argpo = np.array([e.arg_perigee for e in els], dtype=float) * deg
        self.inclo = np.array([e.inclination for e in els], dtype=float) * deg
        self.mo = np.array([e.mean_anomaly for e in els], dtype=float) * deg
        self.nodeo = np.array([e.raan for e in els], dtype=float) * deg
        no_kozai = np.array([e.mean_motion for e in els], dtype=float) / xpdotp

        ss = 78.0 / g.radius + 1.0
        qzms2t = ((120.0 - 78.0) / g.radius) ** 4

        # un-Kozai the mean motion
        ecco = self.ecco
        eccsq = ecco * ecco
        omeosq = 1.0 - eccsq
        rteosq = np.sqrt(omeosq)
        cosio = np.cos(self.inclo)
        cosio2 = cosio * cosio
        ak = (g.xke / no_kozai) ** X2O3
        d1 = 0.75 * g.j2 * (3.0 * cosio2 - 1.0) / (rteosq * omeosq)
        del_ = d1 / (ak * ak)
        adel = ak * (1.0 - del_ * del_ - del_ * (1.0 / 3.0 + 134.0 * del_ * del_ / 81.0))
        del_ = d1 / (adel * adel)
        no = no_kozai / (1.0 + del_)
        self.no_unkozai = no

        ao = (g.xke / no) ** X2O3
        sinio = np.sin(self.inclo)
        po = ao * omeosq
        con42 = 1.0 - 5.0 * cosio2
        self.con41 = -con42 - cosio2 - cosio2
        posq = po * po
        rp = ao * (1.0 - ecco)

        deep = TWOPI / no >= 225.0
        if np.any(deep):
            idx = int(np.flatnonzero(deep)[0])
            raise DeepSpaceRejected(int(self.catalog_ids[idx]))

        self.isimp = rp < (220.0 / g.radius + 1.0)
        perige = (rp - 1.0) * g.radius
        sfour = np.full_like(perige, ss)
        qzms24 = np.full_like(perige, qzms2t)
        low = perige < 156.0
        if np.any(low):
            s4 = np.where(perige < 98.0, 20.0, perige - 78.0)
            sfour = np.where(low, s4 / g.radius + 1.0, sfour)
            qzms24 = np.where(low, ((120.0 - s4) / g.radius) ** 4, qzms24)

        pinvsq = 1.0 / posq
        tsi = 1.0 / (ao - sfour)
        self.eta = ao * ecco * tsi
        etasq = self.eta * self.eta
        eeta = ecco * self.eta
        psisq = np.abs(1.0 - etasq)
        coef = qzms24 * tsi ** 4.0
        coef1 = coef / psisq ** 3.5
        cc2 = coef1 * no * (ao * (1.0 + 1.5 * etasq + eeta * (4.0 + etasq))
                            + 0.375 * g.j2 * tsi / psisq * self.con41
                            * (8.0 + 3.0 * etasq * (8.0 + etasq)))
        self.cc1 = self.bstar * cc2
        ecc_ok = ecco > 1.0e-4
        with np.errstate(divide="ignore", invalid="ignore"):
            cc3 = np.where(ecc_ok, -2.0 * coef * tsi * g.j3oj2 * no * sinio / ecco, 0.0)
        self.x1mth2 = 1.0 - cosio2
        self.cc4 = 2.0 * no * coef1 * ao * omeosq * (
            self.eta * (2.0 + 0.5 * etasq) + ecco * (0.5 + 2.0 * etasq)
            - g.j2 * tsi / (ao * psisq) * (
                -3.0 * self.con41 * (1.0 - 2.0 * eeta + etasq * (1.5 - 0.5 * eeta))
                + 0.75 * self.x1mth2 * (2.0 * etasq - eeta * (1.0 + etasq)) * np.cos(2.0 * self.argpo)))
        self.cc5 = 2.0 * coef1 * ao * omeosq * (1.0 + 2.75 * (etasq + eeta) + eeta * etasq)
        cosio4 = cosio2 * cosio2
        temp1 = 1.5 * g.j2 * pinvsq * no
        temp2 = 0.5 * temp1 * g.j2 * pinvsq
        temp3 = -0.46875 * g.j4 * pinvsq * pinvsq * no
        self.mdot = (no + 0.5 * temp1 * rteosq * self.con41
                     + 0.0625 * temp2 * rteosq * (13.0 - 78.0 * cosio2 + 137.0 * cosio4))
        self.argpdot = (-0.5 * temp1 * con42 + 0.0625 * temp2 * (7.0 - 114.0 * cosio2 + 395.0 * cosio4)
                        + temp3 * (3.0 - 36.0 * cosio2 + 49.0 * cosio4))
        xhdot1 = -temp1 * cosio
        self.nodedot = xhdot1 + (0.5 * temp2 * (4.0 - 19.0 * cosio2)
                                 + 2.0 * temp3 * (3.0 - 7.0 * cosio2)) * cosio
        self.omgcof = self.bstar * cc3 * np.cos(self.argpo)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.xmcof = np.where(ecc_ok, -X2O3 * coef * self.bstar / eeta, 0.0)
        self.nodecf = 3.5 * omeosq * xhdot1 * self.cc1
        self.t2cof = 1.5 * self.cc1
        denom = np.where(np.abs(cosio + 1.0) > 1.5e-12, 1.0 + cosio, 1.5e-12)
        self.xlcof = -0.25 * g.j3oj2 * sinio * (3.0 + 5.0 * cosio) / denom
        self.aycof = -0.5 * g.j3oj2 * sinio
        self.delmo = (1.0 + self.eta * np.cos(self.mo)) ** 3
        self.sinmao = np.sin(self.mo)
        self.x7thm1 = 7.0 * cosio2 - 1.0

        cc1sq = self.cc1 * self.cc1
        d2 = 4.0 * ao * tsi * cc1sq
        temp = d2 * tsi * self.cc1 / 3.0
        d3 = (17.0 * ao + sfour) * temp
        d4 = 0.5 * temp * ao * tsi * (221.0 * ao + 31.0 * sfour) * self.cc1
        full = ~self.isimp
        self.d2 = np.where(full, d2, 0.0)
        self.d3 = np.where(full, d3, 0.0)
        self.d4 = np.where(full, d4, 0.0)
        self.t3cof = np.where(full, d2 + 2.0 * cc1sq, 0.0)
        self.t4cof = np.where(full, 0.25 * (3.0 * d3 + self.cc1 * (12.0 * d2 + 10.0 * cc1sq)), 0.0)
        self.t5cof = np.where(full, 0.2 * (3.0 * d4 + 12.0 * self.cc1 * d3 + 6.0 * d2 * d2
                                           + 15.0 * cc1sq * (2.0 * d2 + cc1sq)), 0.0)

    def propagate_minutes(self, tsince) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Propagate every satellite by ``tsince`` minutes from its own epoch.

        ``tsince`` is a scalar or an array of one value per satellite.
        Returns (r [N,3] km, v [N,3] km/s, error code [N]); failed rows are NaN.
        """
        g = self.gravity
        t = np.broadcast_to(np.asarray(tsince, dtype=float), self.ecco.shape)
        vkmpersec = g.radius * g.xke / 60.0

        xmdf = self.mo + self.mdot * t
        argpdf = self.argpo + self.argpdot * t
        nodedf = self.nodeo + self.nodedot * t
        t2 = t * t
        nodem = nodedf + self.nodecf * t2
        tempa = 1.0 - self.cc1 * t
        tempe = self.bstar * self.cc4 * t
        templ = self.t2cof * t2

        full = ~self.isimp
        delomg = self.omgcof * t
        delm = self.xmcof * ((1.0 + self.eta * np.cos(xmdf)) ** 3 - self.delmo)
        temp = delomg + delm
        mm = np.where(full, xmdf + temp, xmdf)
        argpm = np.where(full, argpdf - temp, argpdf)
        t3 = t2 * t
        t4 = t3 * t
        tempa = np.where(full, tempa - self.d2 * t2 - self.d3 * t3 - self.d4 * t4, tempa)
        tempe = np.where(full, tempe + self.bstar * self.cc5 * (np.sin(mm) - self.sinmao), tempe)
        templ = np.where(full, templ + self.t3cof * t3 + t4 * (self.t4cof + t * self.t5cof), templ)

        error = np.zeros(self.ecco.shape, dtype=np.int64)
        nm = self.no_unkozai
        error[nm <= 0.0] = 2
        with np.errstate(invalid="ignore", divide="ignore"):
            am = (g.xke / nm) ** X2O3 * tempa * tempa
            nm = g.xke / am ** 1.5
        em = self.ecco - tempe
        error[(error == 0) & ((em >= 1.0) | (em < -0.001) | ~np.isfinite(am))] = 1
        em = np.where(em < 1.0e-6, 1.0e-6, em)
        mm = mm + self.no_unkozai * templ
        xlm = mm + argpm + nodem
        nodem = np.where(nodem >= 0.0, np.fmod(nodem, TWOPI), -np.fmod(-nodem, TWOPI))
        argpm = np.mod(argpm, TWOPI)
        xlm = np.mod(xlm, TWOPI)
        mm = np.mod(xlm - argpm - nodem, TWOPI)

        sinip = np.sin(self.inclo)
        cosip = np.cos(self.inclo)

        # long period periodics
        axnl = em * np.cos(argpm)
        with np.errstate(invalid="ignore", divide="ignore"):
            temp = 1.0 / (am * (1.0 - em * em))
        aynl = em * np.sin(argpm) + temp * self.aycof
        xl = mm + argpm + nodem + temp * self.xlcof * axnl

        # Kepler's equation, same iteration limits as the reference code
        u = np.mod(xl - nodem, TWOPI)
        eo1 = u.copy()
        tem5 = np.full_like(u, 9999.9)
        sineo1 = np.sin(eo1)
        coseo1 = np.cos(eo1)
        for _ in range(10):
            active = np.abs(tem5) >= 1.0e-12
            if not active.any():
                break
            s = np.sin(eo1)
            c = np.cos(eo1)
            sineo1 = np.where(active, s, sineo1)
            coseo1 = np.where(active, c, coseo1)
            step = 1.0 - coseo1 * axnl - sineo1 * aynl
            step = (u - aynl * coseo1 + axnl * sineo1 - eo1) / step
            step = np.clip(step, -0.95, 0.95)
            eo1 = np.where(active, eo1 + step, eo1)
            tem5 = np.where(active, step, tem5)

        # short period preliminary quantities
        ecose = axnl * coseo1 + aynl * sineo1
        esine = axnl * sineo1 - aynl * coseo1
        el2 = axnl * axnl + aynl * aynl
        pl = am * (1.0 - el2)
        error[(error == 0) & (pl < 0.0)] = 4
        with np.errstate(invalid="ignore", divide="ignore"):
            rl = am * (1.0 - ecose)
            rdotl = np.sqrt(am) * esine / rl
            rvdotl = np.sqrt(pl) / rl
            betal = np.sqrt(1.0 - el2)
            temp = esine / (1.0 + betal)
            sinu = am / rl * (sineo1 - aynl - axnl * temp)
            cosu = am / rl * (coseo1 - axnl + aynl * temp)
            su = np.arctan2(sinu, cosu)
            sin2u = (cosu + cosu) * sinu
            cos2u = 1.0 - 2.0 * sinu * sinu
            temp = 1.0 / pl
            temp1 = 0.5 * g.j2 * temp
            temp2 = temp1 * temp

            mrt = rl * (1.0 - 1.5 * temp2 * betal * self.con41) + 0.5 * temp1 * self.x1mth2 * cos2u
            su = su - 0.25 * temp2 * self.x7thm1 * sin2u
            xnode = nodem + 1.5 * temp2 * cosip * sin2u
            xinc = self.inclo + 1.5 * temp2 * cosip * sinip * cos2u
            mvt = rdotl - nm * temp1 * self.x1mth2 * sin2u / g.xke
            rvdot = rvdotl + nm * temp1 * (self.x1mth2 * cos2u + 1.5 * self.con41) / g.xke

        sinsu = np.sin(su)
        cossu = np.cos(su)
        snod = np.sin(xnode)
        cnod = np.cos(xnode)
        sini = np.sin(xinc)
        cosi = np.cos(xinc)
        xmx = -snod * cosi
        xmy = cnod * cosi
        ux = xmx * sinsu + cnod * cossu
        uy = xmy * sinsu + snod * cossu
        uz = sini * sinsu
        vx = xmx * cossu - cnod * sinsu
        vy = xmy * cossu - snod * sinsu
        vz = sini * cossu

        mr = mrt * g.radius
        r = np.stack([mr * ux, mr * uy, mr * uz], axis=-1)
        v = np.stack([(mvt * ux + rvdot * vx) * vkmpersec,
                      (mvt * uy + rvdot * vy) * vkmpersec,
                      (mvt * uz + rvdot * vz) * vkmpersec], axis=-1)
        error[(error == 0) & ~(mrt >= 1.0)] = 6
        bad = error != 0
        if bad.any():
            r[bad] = np.nan
            v[bad] = np.nan
        return r, v, error

    def minutes_since_epoch(self, at: datetime) -> np.ndarray:
        return np.array([(at - ep).total_seconds() / 60.0 for ep in self.epochs], dtype=float)

    def propagate(self, at: datetime, guard_days: float | None = EPOCH_GUARD_DAYS):
        """Propagate all satellites to a common UTC instant."""
        tsince = self.minutes_since_epoch(at)
        if guard_days is not None and tsince.size and np.max(np.abs(tsince)) > guard_days * 1440.0:
            idx = int(np.argmax(np.abs(tsince)))
            raise EpochTooFar(
                f"catalog {self.catalog_ids[idx]}: {at.isoformat()} is "
                f"{tsince[idx] / 1440.0:+.2f} days from its element epoch (limit {guard_days})")
        return self.propagate_minutes(tsince)


def raise_for_error(batch: Sgp4Batch, error: np.ndarray, at: datetime | None = None) -> None:
    bad = np.flatnonzero(error)
    if bad.size:
        i = int(bad[0])
        code = int(error[i])
        raise PropagationDiverged(int(batch.catalog_ids[i]), code, ERROR_MESSAGES.get(code, ""), at)
