"""Forced advection-dissipation chain on a periodic ring of variables.

dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, indices cyclic. With
F = 8 the dynamics are chaotic and the model is a standard assimilation
testbed. Functions accept a single state (n,) or an ensemble (n, m) and
act column-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError


@dataclass(frozen=True)
class Lorenz96Config:
    nstate: int
    forcing: float = 8.0
    dt: float = 0.05

    def __post_init__(self):
        if self.nstate < 4:
            raise ValueError("the periodic stencil needs at least 4 variables")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def tendency(x: np.ndarray, forcing: float) -> np.ndarray:
    """Right-hand side of the ring ODE, cyclic in the first axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 4:
        raise ValueError("state must have at least 4 components")
    xp1 = np.roll(x, -1, axis=0)
    xm2 = np.roll(x, 2, axis=0)
    xm1 = np.roll(x, 1, axis=0)
    return (xp1 - xm2) * xm1 - x + forcing


def rk4_step(x: np.ndarray, dt: float, forcing: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step (dt = 0 is the identity)."""
    x = np.asarray(x, dtype=float)
    k1 = tendency(x, forcing)
    k2 = tendency(x + 0.5 * dt * k1, forcing)
    k3 = tendency(x + 0.5 * dt * k2, forcing)
    k4 = tendency(x + dt * k3, forcing)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(x: np.ndarray):
    if np.all(np.isfinite(x)):
        return
    if x.ndim == 2:
        bad = int(np.argmax(~np.isfinite(x).all(axis=0)))
        raise DivergenceError("state became non-finite", member=bad)
    raise DivergenceError("state became non-finite")


class Lorenz96:
    """Model operator advancing states with fixed-step RK4."""

    def __init__(self, config: Lorenz96Config):
        self.config = config

    def step(self, x: np.ndarray) -> np.ndarray:
        out = rk4_step(x, self.config.dt, self.config.forcing)
        _check_finite(out)
        return out

    def advance(self, x: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Advance from t0 to t1; the window must be a whole number of steps."""
        nsteps = _window_steps(t0, t1, self.config.dt)
        x = np.asarray(x, dtype=float)
        for _ in range(nsteps):
            x = self.step(x)
        return x


def _window_steps(t0: float, t1: float, dt: float) -> int:
    if t1 < t0:
        raise ValueError(f"window is reversed: {t0} > {t1}")
    nsteps = round((t1 - t0) / dt)
    if abs(nsteps * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1 - t0)):
        raise ValueError(
            f"window [{t0}, {t1}] is not a whole number of steps of dt={dt}"
        )
    return nsteps
