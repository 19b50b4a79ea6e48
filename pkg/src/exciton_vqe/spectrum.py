"""Lorentzian-broadened absorption spectra from transition lists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SpectrumResult:
    """Stick transitions plus their broadened curve (energies in eV).

    ``delta`` is the half-width at half-maximum of the area-normalized
    Lorentzian assigned to each transition.
    """

    energies_ev: np.ndarray
    strengths: np.ndarray
    grid_ev: np.ndarray
    intensity: np.ndarray
    delta: float
    method: str

    def __post_init__(self) -> None:
        if np.any(np.diff(self.grid_ev) <= 0):
            raise ValueError("energy grid must be strictly increasing")
        if np.any(self.intensity < 0):
            raise ValueError("intensities must be non-negative")


def energy_grid(emin: float, emax: float, points: int) -> np.ndarray:
    if points < 2:
        raise ValueError("need at least two grid points")
    if not emax > emin:
        raise ValueError("emax must exceed emin")
    return np.linspace(emin, emax, points)


def broaden(energies_ev, strengths, delta: float, grid: np.ndarray) -> np.ndarray:
    """``I(E) = sum_t O_t (1/pi) delta / ((E - E_t)^2 + delta^2)``.

    Each line integrates to its oscillator strength and drops to half its
    peak at ``E_t +- delta``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    e = np.asarray(energies_ev, dtype=float).reshape(-1)
    o = np.asarray(strengths, dtype=float).reshape(-1)
    if e.shape != o.shape:
        raise ValueError("energies and strengths differ in length")
    grid = np.asarray(grid, dtype=float)
    out = np.zeros_like(grid)
    for et, ot in zip(e, o):
        out += ot * (delta / np.pi) / ((grid - et) ** 2 + delta**2)
    return out


def spectrum(energies_ev, strengths, delta: float, grid: np.ndarray, method: str) -> SpectrumResult:
    e = np.asarray(energies_ev, dtype=float)
    o = np.asarray(strengths, dtype=float)
    return SpectrumResult(e, o, np.asarray(grid, dtype=float), broaden(e, o, delta, grid), float(delta), method)
