"""Closed-form stand-in for the robot-camera scenario.

An end-effector camera observes a cube on a floor. Perceived brightness is
an affine function of effector height, speed and cube distance; the floor
channel depends on height alone. The three drivers are exogenous smoothed
random walks with no mechanism among them, so hiding the height column
turns it into a latent confounder of the two color channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, InterventionRun, int_label
from .errors import RangeError
from .graph import TsDag, TsPAG
from .modelgen import project_to_mag

FLOOR = "F_c"
CUBE = "C_c"
HEIGHT = "H"
SPEED = "v"
DISTANCE = "d_c"


@dataclass(frozen=True)
class CameraModel:
    """Gains and ranges of the brightness model; defaults keep b in [0, 1]."""

    k_h: float = 0.3
    k_v: float = 0.3
    k_d: float = 0.4
    h_max: float = 1.0
    v_max: float = 1.0
    d_c_max: float = 1.0

    def __post_init__(self):
        for name in ("k_h", "k_v", "k_d", "h_max", "v_max", "d_c_max"):
            if getattr(self, name) <= 0:
                raise RangeError(f"camera parameter {name} must be positive")


def brightness(h, v, d_c, m: CameraModel = CameraModel()):
    """Perceived brightness for height, speed and cube distance.

    b = k_h * h/h_max + k_v * (1 - v/v_max) + k_d * d_c/d_c_max, with every
    input checked against [0, max].
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    d_c = np.asarray(d_c, dtype=float)
    for arr, hi, name in ((h, m.h_max, "H"), (v, m.v_max, "v"), (d_c, m.d_c_max, "d_c")):
        if np.any(arr < 0) or np.any(arr > hi):
            raise RangeError(f"{name} outside [0, {hi}]")
    b = m.k_h * h / m.h_max + m.k_v * (1.0 - v / m.v_max) + m.k_d * d_c / m.d_c_max
    return float(b) if b.ndim == 0 else b


def _ou_walk(rng, T, mean, rho, sigma, lo, hi):
    x = np.empty(T)
    x[0] = mean
    noise = rng.normal(0.0, sigma, T)
    for t in range(1, T):
        x[t] = mean + rho * (x[t - 1] - mean) + noise[t]
    return np.clip(x, lo, hi)


def generate_trajectory(T: int, seed: int = 0, m: CameraModel = CameraModel()):
    """Exogenous effector trajectory: height, speed, cube distance.

    Each driver is an autocorrelated mean-reverting walk clipped into its
    admissible range; the three walks are generated independently so the
    declared ground truth carries no mechanism among them.
    """
    if T < 2:
        raise ValueError(f"trajectory needs T >= 2, got {T}")
    rng = np.random.default_rng(seed)
    h = _ou_walk(rng, T, 0.50 * m.h_max, 0.70, 0.28 * m.h_max, 0.02 * m.h_max, m.h_max)
    v = _ou_walk(rng, T, 0.45 * m.v_max, 0.55, 0.15 * m.v_max, 0.0, m.v_max)
    d = _ou_walk(rng, T, 0.50 * m.d_c_max, 0.55, 0.15 * m.d_c_max, 0.02 * m.d_c_max, m.d_c_max)
    return h, v, d


def scenario_dataset(T_obs: int, T_int: int = 0, hide_h: bool = False,
                     intervene_fc: float | None = None,
                     m: CameraModel = CameraModel(), seed: int = 0,
                     noise_std: float = 0.05):
    """Observational block plus an optional hard intervention on the floor color.

    Floor brightness follows height alone with a one-step delay; cube
    brightness follows the full model, also delayed by one step. Small
    Gaussian observation noise keeps the color channels non-degenerate.
    Returns (Dataset, InterventionRun or None).
    """
    if T_obs < 2:
        raise ValueError(f"T_obs must be at least 2, got {T_obs}")
    if intervene_fc is not None and T_int < 2:
        raise ValueError(f"T_int must be at least 2, got {T_int}")
    total = T_obs + (T_int if intervene_fc is not None else 0)
    h, v, d = generate_trajectory(total + 1, seed, m)
    rng = np.random.default_rng([seed, 1])
    floor = m.k_h * h[:-1] / m.h_max + rng.normal(0.0, noise_std, total)
    cube = brightness(h[:-1], v[:-1], d[:-1], m) + rng.normal(0.0, noise_std, total)
    h, v, d = h[1:], v[1:], d[1:]

    columns = {FLOOR: floor, CUBE: cube, HEIGHT: h, SPEED: v, DISTANCE: d}
    names = [FLOOR, CUBE, SPEED, DISTANCE] if hide_h else [FLOOR, CUBE, HEIGHT, SPEED, DISTANCE]
    stacked = np.column_stack([columns[n] for n in names])

    obs = Dataset(names, stacked[:T_obs])
    if intervene_fc is None:
        return obs, None
    block = stacked[T_obs:].copy()
    block[:, names.index(FLOOR)] = float(intervene_fc)
    run = InterventionRun(
        FLOOR, float(intervene_fc),
        Dataset(names, block, [int_label(0)] * T_int),
    )
    return obs, run


def scenario_dag(hide_h: bool = False) -> TsDag:
    """The declared causal structure of the scenario (drivers exogenous)."""
    edges = {
        (HEIGHT, 1, FLOOR),
        (HEIGHT, 1, CUBE),
        (SPEED, 1, CUBE),
        (DISTANCE, 1, CUBE),
    }
    return TsDag(
        (FLOOR, CUBE, HEIGHT, SPEED, DISTANCE), 1, edges,
        hidden={HEIGHT} if hide_h else (),
    )


def scenario_truth(hide_h: bool = False, tau_max: int = 1) -> TsPAG:
    """Ground-truth window graph; with height hidden, its latent projection."""
    return project_to_mag(scenario_dag(hide_h), tau_max)
