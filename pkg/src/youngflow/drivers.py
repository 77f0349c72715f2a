"""Driver path generation: exact-covariance fBm and deterministic families."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .paths import PathError, SampledPath

# Bump when the sampling algorithm or RNG contract changes; recorded in
# generated metadata so stored paths can be traced to the generator.
GENERATOR_VERSION = "youngflow-gen-1"

DEFAULT_CHOLESKY_CAP = 2**13


class ResourceError(RuntimeError):
    """Request exceeds the configured dense-factorization budget."""


class GenerationError(RuntimeError):
    """Numerical failure while sampling (e.g. covariance not factorizable)."""


@dataclass(frozen=True)
class FbmSpec:
    """Fractional Brownian motion sample spec, Hurst index in (0.5, 1).

    The path starts at zero on a uniform grid of n_points over
    [0, horizon]. A fixed 64-bit seed makes the sample bitwise
    reproducible for a given numpy/scipy build.
    """

    hurst: float
    n_points: int
    horizon: float = 1.0
    seed: int = 0
    max_cholesky_points: int = DEFAULT_CHOLESKY_CAP

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise PathError(f"hurst must lie in (0.5, 1), got {self.hurst}")
        if self.n_points < 2:
            raise PathError("n_points must be >= 2")
        if self.horizon <= 0:
            raise PathError("horizon must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise PathError("seed must fit in 64 bits")


def fbm_value_covariance(s: np.ndarray, t: np.ndarray, hurst: float) -> np.ndarray:
    """R(s, t) = (s^2H + t^2H - |t - s|^2H) / 2."""
    h2 = 2.0 * hurst
    return 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)


def fbm_increment_covariance(times: np.ndarray, hurst: float) -> np.ndarray:
    """Covariance of the increments over consecutive grid intervals.

    Second difference of R: Cov(dB_i, dB_j) =
    R(t_{i+1}, t_{j+1}) - R(t_{i+1}, t_j) - R(t_i, t_{j+1}) + R(t_i, t_j).
    """
    a, b = times[:-1], times[1:]
    return (
        fbm_value_covariance(b[:, None], b[None, :], hurst)
        - fbm_value_covariance(b[:, None], a[None, :], hurst)
        - fbm_value_covariance(a[:, None], b[None, :], hurst)
        + fbm_value_covariance(a[:, None], a[None, :], hurst)
    )


# The factor depends only on (hurst, n_points, horizon), not the seed, so
# sweeping seeds at a fixed resolution pays the O(n^3) cost once. Entries
# are O(n^2) memory (128 MB at the default cap), hence the small cache.
@lru_cache(maxsize=4)
def _increment_cholesky(hurst: float, n_points: int, horizon: float) -> np.ndarray:
    times = np.linspace(0.0, horizon, n_points)
    cov = fbm_increment_covariance(times, hurst)
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise GenerationError(f"increment covariance not factorizable: {exc}") from exc


def gen_fbm(spec: FbmSpec) -> SampledPath:
    """Sample fBm by exact dense Cholesky of the increment covariance.

    No FFT shortcut and no jitter: the factorization either succeeds
    exactly or fails loudly. Cost is O(n^3) time, O(n^2) memory, hence
    the hard cap max_cholesky_points.
    """
    if spec.n_points > spec.max_cholesky_points:
        raise ResourceError(
            f"n_points={spec.n_points} exceeds the dense Cholesky cap "
            f"{spec.max_cholesky_points}; raise max_cholesky_points explicitly"
        )
    times = np.linspace(0.0, spec.horizon, spec.n_points)
    lower = _increment_cholesky(float(spec.hurst), int(spec.n_points), float(spec.horizon))
    z = np.random.default_rng(int(spec.seed)).standard_normal(spec.n_points - 1)
    values = np.concatenate([[0.0], np.cumsum(lower @ z)])
    return SampledPath(times, values)


def fbm_metadata(spec: FbmSpec) -> dict:
    return {"spec": {**asdict(spec), "kind": "fbm"}, "generator_version": GENERATOR_VERSION}


DETERMINISTIC_KINDS = ("linear", "power", "sine", "polygonal")


@dataclass(frozen=True)
class DeterministicSpec:
    """Smooth or polygonal test drivers on a uniform grid over [0, horizon].

    linear:    X_t = t
    power:     X_t = t^alpha
    sine:      X_t = amplitude * sin(2 pi frequency t)
    polygonal: linear interpolation through equally spaced vertices
    """

    kind: str
    n_points: int
    horizon: float = 1.0
    alpha: float = 2.0
    amplitude: float = 1.0
    frequency: float = 1.0
    vertices: tuple = ()

    def __post_init__(self):
        if self.kind not in DETERMINISTIC_KINDS:
            raise PathError(f"unknown deterministic kind {self.kind!r}")
        if self.n_points < 2:
            raise PathError("n_points must be >= 2")
        if self.horizon <= 0:
            raise PathError("horizon must be positive")
        if self.kind == "power" and self.alpha <= 0:
            raise PathError("power driver needs alpha > 0")
        if self.kind == "polygonal" and len(self.vertices) < 2:
            raise PathError("polygonal driver needs at least two vertices")


def gen_deterministic(spec: DeterministicSpec) -> SampledPath:
    times = np.linspace(0.0, spec.horizon, spec.n_points)
    if spec.kind == "linear":
        values = times.copy()
    elif spec.kind == "power":
        values = times**spec.alpha
    elif spec.kind == "sine":
        values = spec.amplitude * np.sin(2.0 * np.pi * spec.frequency * times)
    else:
        verts = np.asarray(spec.vertices, dtype=float)
        if verts.ndim == 1:
            verts = verts[:, None]
        knots = np.linspace(0.0, spec.horizon, verts.shape[0])
        values = np.column_stack(
            [np.interp(times, knots, verts[:, j]) for j in range(verts.shape[1])]
        )
    return SampledPath(times, values)


def deterministic_metadata(spec: DeterministicSpec) -> dict:
    meta = {k: v for k, v in asdict(spec).items() if k != "vertices" or v}
    if "vertices" in meta:
        meta["vertices"] = [list(np.atleast_1d(v)) for v in meta["vertices"]]
    return {"spec": {**meta, "kind": spec.kind}, "generator_version": GENERATOR_VERSION}
