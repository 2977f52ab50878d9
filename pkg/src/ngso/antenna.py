"""Planar-array beam models: digital steering vectors and Butler beams.

Directions are given in the array's local frame through two angles. With the
array lying in the x-z plane and element offsets along x (azimuth axis) and z
(polar axis), a unit direction u maps to

    sin(azimuth) = u_x,   cos(polar) = u_z,

so the separable steering vectors below are the exact plane-wave response of
the array. Elements are isotropic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import SPEED_OF_LIGHT


@dataclass(frozen=True)
class ArrayGeometry:
    k: int
    spacing_m: float
    wavelength_m: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not (self.spacing_m > 0 and self.wavelength_m > 0):
            raise ValueError("spacing and wavelength must be positive")

    @classmethod
    def for_frequency(cls, k: int, f: float, spacing_wavelengths: float = 0.5) -> "ArrayGeometry":
        lam = SPEED_OF_LIGHT / f
        return cls(k, spacing_wavelengths * lam, lam)

    @property
    def phase_step(self) -> float:
        return 2.0 * math.pi * self.spacing_m / self.wavelength_m


class Direction(NamedTuple):
    azimuth: float
    polar: float


def direction_from_unit(u) -> Direction:
    """Local-frame unit vector(s) (..., 3) to (azimuth, polar)."""
    u = np.asarray(u, dtype=float)
    az = np.arcsin(np.clip(u[..., 0], -1.0, 1.0))
    pol = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    return Direction(az, pol)


def _ula(geom: ArrayGeometry, cosine) -> np.ndarray:
    m = np.arange(geom.k)
    cosine = np.asarray(cosine, dtype=float)
    return np.exp(-1j * geom.phase_step * np.multiply.outer(cosine, m))


def steering_azimuth(geom: ArrayGeometry, azimuth) -> np.ndarray:
    return _ula(geom, np.sin(azimuth))


def steering_polar(geom: ArrayGeometry, polar) -> np.ndarray:
    return _ula(geom, np.cos(polar))


def steering_vector(geom: ArrayGeometry, direction: Direction) -> np.ndarray:
    """Combined K^2 steering vector, polar part outermost."""
    return np.kron(steering_polar(geom, direction.polar), steering_azimuth(geom, direction.azimuth))


def butler_polar(geom: ArrayGeometry, fixed_polar: float = math.pi / 2) -> np.ndarray:
    return steering_polar(geom, fixed_polar) / math.sqrt(geom.k)


def butler_azimuth(geom: ArrayGeometry) -> np.ndarray:
    """(K, K) array; row k-1 is the azimuth vector of beam k."""
    k = np.arange(1, geom.k + 1)[:, None]
    m = np.arange(geom.k)[None, :]
    return np.exp(-1j * math.pi * (2 * k - 1) * m / geom.k) / math.sqrt(geom.k)


def butler_beams(geom: ArrayGeometry, fixed_polar: float = math.pi / 2) -> np.ndarray:
    """(K, K^2) array of combined beam weight vectors, beam k in row k-1."""
    pol = butler_polar(geom, fixed_polar)
    return np.stack([np.kron(pol, az) for az in butler_azimuth(geom)])


def array_gain(weights, geom: ArrayGeometry, target: Direction):
    """Power gain |a^H w|^2 / (w^H w) toward ``target`` (scalar or arrays)."""
    w = np.asarray(weights, dtype=complex)
    if w.shape[-1] != geom.k**2:
        raise ValueError(f"weights must have {geom.k**2} entries, got {w.shape[-1]}")
    W = w.reshape(w.shape[:-1] + (geom.k, geom.k))
    a_pol = steering_polar(geom, target.polar)
    a_az = steering_azimuth(geom, target.azimuth)
    resp = np.einsum("...p,...pm,...m->...", a_pol.conj(), W, a_az.conj())
    return np.abs(resp) ** 2 / np.sum(np.abs(w) ** 2, axis=-1)


def _ula_power(geom: ArrayGeometry, dcos):
    """|sum_m exp(j psi m)|^2 for psi = phase_step * dcos, closed form."""
    psi = geom.phase_step * np.asarray(dcos, dtype=float)
    half = psi / 2.0
    s = np.sin(half)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (np.sin(geom.k * half) / s) ** 2
    return np.where(np.abs(s) < 1e-12, float(geom.k**2), val)


def steered_gain(geom: ArrayGeometry, steered_unit, true_unit):
    """Gain of weights matched to ``steered_unit`` evaluated toward ``true_unit``.

    Vectorised equivalent of ``array_gain(steering_vector(steered)/K, ...)``.
    """
    s = np.asarray(steered_unit, dtype=float)
    t = np.asarray(true_unit, dtype=float)
    return _ula_power(geom, s[..., 0] - t[..., 0]) * _ula_power(geom, s[..., 2] - t[..., 2]) / geom.k**2


def butler_gains(geom: ArrayGeometry, true_unit, fixed_polar: float = math.pi / 2):
    """Gains (..., K) of every Butler beam toward local unit vectors."""
    t = np.asarray(true_unit, dtype=float)
    pol = _ula_power(geom, math.cos(fixed_polar) - t[..., 2]) / geom.k
    # beam k azimuth vector matches a direction cosine of (2k-1)/(K * 2 d_e/lambda)
    k = np.arange(1, geom.k + 1)
    beam_cos = (2 * k - 1) * math.pi / geom.k / geom.phase_step
    az = _ula_power(geom, beam_cos - t[..., 0, None]) / geom.k
    return pol[..., None] * az


def best_butler_beam(geom: ArrayGeometry, target: Direction, fixed_polar: float = math.pi / 2):
    """Index k (1-based) of the strongest Butler beam toward ``target`` and its gain."""
    gains = array_gain(butler_beams(geom, fixed_polar), geom, Direction(
        np.asarray(target.azimuth)[..., None], np.asarray(target.polar)[..., None]))
    k = int(np.argmax(gains)) + 1
    return k, float(gains[k - 1])


def repointing_gain_penalty(geom: ArrayGeometry, true_direction: Direction, steered_direction: Direction):
    """Gain of a beam steered toward ``steered_direction`` seen from ``true_direction``."""
    w = steering_vector(geom, steered_direction) / geom.k
    return array_gain(w, geom, true_direction)


def beam_pattern(geom: ArrayGeometry, azimuths, fixed_polar: float = math.pi / 2) -> np.ndarray:
    """Butler beam gains (len(azimuths), K) along the fixed polar cut."""
    az = np.asarray(azimuths, dtype=float)
    beams = butler_beams(geom, fixed_polar)
    target = Direction(az[:, None], np.full((az.size, 1), fixed_polar))
    return array_gain(beams, geom, target)


def random_unit_vectors(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sphere_average_gain(weights, geom: ArrayGeometry, n_samples: int = 200_000, seed: int = 0) -> float:
    """Monte Carlo mean of the gain over directions uniform on the sphere."""
    u = random_unit_vectors(n_samples, np.random.default_rng(seed))
    return float(np.mean(array_gain(weights, geom, direction_from_unit(u))))
