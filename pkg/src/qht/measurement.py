"""Homodyne measurement simulation: ideal quadrature draws and detector noise.

Records are plain float arrays of shape (n, 2).  ``sample_ideal`` yields
columns (x, phi); ``sample_records`` yields the noisy columns (y, phi)
with y = sqrt(eta) x + sqrt((1-eta)/2) xi.

Randomness is counter-based: records are generated in fixed blocks of
``BLOCK_SIZE``, each block from its own Philox stream keyed by
(seed, block index, substream tag).  Identical seeds give identical
record streams no matter how generation is chunked or parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import StateModel, quadrature_density

__all__ = ["NoiseConfig", "sample_ideal", "add_noise", "sample_records", "noisy_density"]

BLOCK_SIZE = 4096

# give up if a rejection sampler sees this many consecutive misses
_MAX_CONSECUTIVE_REJECTS = 10 ** 6

_TAG_IDEAL = 0
_TAG_NOISE = 1

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(200)


@dataclass(frozen=True)
class NoiseConfig:
    """Detection efficiency eta in (1/2, 1] and the derived Gaussian factor."""

    eta: float

    def __post_init__(self):
        if not 0.5 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (1/2, 1], got {self.eta}")

    @property
    def gamma(self) -> float:
        """(1 - eta) / (4 eta), in [0, 1/4)."""
        return (1.0 - self.eta) / (4.0 * self.eta)


def _block_rng(seed: int, block: int, tag: int) -> np.random.Generator:
    # 128-bit Philox key: (seed | block | tag); order-independent across blocks
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a non-negative 64-bit integer")
    key = (seed << 64) | (block << 1) | tag
    return np.random.Generator(np.random.Philox(key=key))


def _single_photon_envelope() -> float:
    # acceptance ratio against a N(0,1) proposal is 2*sqrt(2)*x^2*exp(-x^2/2);
    # its maximum sits at x^2 = 2, located numerically once
    x = np.linspace(0.0, 6.0, 120001)
    ratio = 2.0 * np.sqrt(2.0) * x * x * np.exp(-x * x / 2.0)
    return float(ratio.max()) * (1.0 + 1e-9)


_SINGLE_PHOTON_M = _single_photon_envelope()


def _draw_single_photon(rng: np.random.Generator, m: int) -> np.ndarray:
    """Rejection sampling of p(x) = 2 x^2 exp(-x^2)/sqrt(pi) from N(0,1)."""
    out = np.empty(m)
    filled = 0
    misses = 0
    while filled < m:
        need = m - filled
        prop = rng.standard_normal(need)
        u = rng.uniform(0.0, 1.0, need)
        ratio = 2.0 * np.sqrt(2.0) * prop * prop * np.exp(-prop * prop / 2.0)
        acc = u < ratio / _SINGLE_PHOTON_M
        got = int(acc.sum())
        if got == 0:
            misses += need
            if misses >= _MAX_CONSECUTIVE_REJECTS:
                raise RuntimeError(
                    "single-photon rejection sampler stalled; envelope constant is broken"
                )
        else:
            misses = 0
        out[filled : filled + got] = prop[acc]
        filled += got
    return out


def _draw_cat(rng: np.random.Generator, phi: np.ndarray, state: StateModel) -> np.ndarray:
    """Rejection sampling of the cat quadrature from a two-Gaussian mixture.

    Proposal: (1/2) N(mu, 1/2) + (1/2) N(-mu, 1/2) with mu = q0 cos(phi).
    The interference term is bounded by the sum of the two bumps, giving
    the envelope constant 2 / (1 + exp(-q0^2)).
    """
    q0 = state.q0
    envelope = 2.0 / (1.0 + np.exp(-q0 * q0))
    mu = q0 * np.cos(phi)
    out = np.empty(phi.size)
    pending = np.arange(phi.size)
    misses = 0
    while pending.size:
        mm = mu[pending]
        sign = np.where(rng.uniform(size=pending.size) < 0.5, 1.0, -1.0)
        prop = rng.normal(sign * mm, np.sqrt(0.5))
        u = rng.uniform(size=pending.size)
        proposal_pdf = (np.exp(-((prop - mm) ** 2)) + np.exp(-((prop + mm) ** 2))) / (
            2.0 * np.sqrt(np.pi)
        )
        target = _cat_density(prop, phi[pending], q0)
        acc = u < target / (envelope * proposal_pdf)
        got = int(acc.sum())
        if got == 0:
            misses += pending.size
            if misses >= _MAX_CONSECUTIVE_REJECTS:
                raise RuntimeError("cat rejection sampler stalled; envelope constant is broken")
        else:
            misses = 0
        out[pending[acc]] = prop[acc]
        pending = pending[~acc]
    return out


def _cat_density(x, phi, q0):
    # vectorized over paired (x, phi) arrays
    mu = q0 * np.cos(phi)
    s = np.sin(phi)
    num = (
        np.exp(-((x - mu) ** 2))
        + np.exp(-((x + mu) ** 2))
        + 2.0 * np.cos(2.0 * q0 * x * s) * np.exp(-x * x - q0 * q0 * np.cos(phi) ** 2)
    )
    return num / (2.0 * np.sqrt(np.pi) * (1.0 + np.exp(-q0 * q0)))


def _draw_ideal_block(rng: np.random.Generator, state: StateModel, m: int) -> np.ndarray:
    phi = rng.uniform(0.0, np.pi, m)
    if state.kind == "vacuum":
        x = rng.normal(0.0, np.sqrt(0.5), m)
    elif state.kind == "coherent":
        x = rng.normal(state.q0 * np.cos(phi), np.sqrt(0.5))
    elif state.kind == "thermal":
        x = rng.normal(0.0, np.sqrt(0.5 / np.tanh(state.beta / 2.0)), m)
    elif state.kind == "single_photon":
        x = _draw_single_photon(rng, m)
    else:
        x = _draw_cat(rng, phi, state)
    return np.column_stack([x, phi])


def sample_ideal(state: StateModel, n: int, seed: int) -> np.ndarray:
    """Draw n ideal records (x, phi): phi uniform on [0, pi], x ~ p(.|phi).

    Gaussian-density states (vacuum, coherent, thermal) use exact normal
    draws; single photon and cat use rejection sampling.  Deterministic
    given the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    out = np.empty((n, 2))
    for block in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE):
        lo = block * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, n)
        rng = _block_rng(seed, block, _TAG_IDEAL)
        # full blocks are always drawn so that streams are prefix-stable in n
        out[lo:hi] = _draw_ideal_block(rng, state, BLOCK_SIZE)[: hi - lo]
    return out


def add_noise(x: np.ndarray, cfg: NoiseConfig, seed: int) -> np.ndarray:
    """Corrupt ideal quadratures: y = sqrt(eta) x + sqrt((1-eta)/2) xi.

    At eta = 1 the input is returned unchanged.  The noise stream is
    independent of the ideal-sampling stream for the same seed.
    """
    x = np.asarray(x, dtype=float)
    if cfg.eta == 1.0:
        return x.copy()
    n = x.shape[0]
    y = np.empty_like(x)
    scale = np.sqrt((1.0 - cfg.eta) / 2.0)
    for block in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE):
        lo = block * BLOCK_SIZE
        hi = min(lo + BLOCK_SIZE, n)
        rng = _block_rng(seed, block, _TAG_NOISE)
        xi = rng.standard_normal(BLOCK_SIZE)[: hi - lo]
        y[lo:hi] = np.sqrt(cfg.eta) * x[lo:hi] + scale * xi
    return y


def sample_records(state: StateModel, n: int, cfg: NoiseConfig, seed: int) -> np.ndarray:
    """Draw n noisy records (y, phi); equals sample_ideal composed with add_noise."""
    records = sample_ideal(state, n, seed)
    records[:, 0] = add_noise(records[:, 0], cfg, seed)
    return records


def noisy_density(state: StateModel, y, phi: float, cfg: NoiseConfig):
    """Density of the noisy quadrature Y given Phi = phi.

    Convolution of the rescaled ideal density with the centered Gaussian
    of variance (1-eta)/2, evaluated by 200-node Gauss-Hermite quadrature
    (spectrally accurate for this smooth integrand).
    """
    if not 0.0 <= phi <= np.pi:
        raise ValueError("phi must lie in [0, pi]")
    y = np.asarray(y, dtype=float)
    if cfg.eta == 1.0:
        return quadrature_density(state, y, phi)
    sigma = np.sqrt((1.0 - cfg.eta) / 2.0)
    # E_u[(1/sqrt(eta)) p((y-u)/sqrt(eta))], u ~ N(0, sigma^2)
    u = np.sqrt(2.0) * sigma * _GH_NODES
    shifted = (y[..., None] - u) / np.sqrt(cfg.eta)
    vals = quadrature_density(state, shifted, phi) / np.sqrt(cfg.eta)
    p = vals @ _GH_WEIGHTS / np.sqrt(np.pi)
    return p if p.ndim else float(p)
