"""Catalog of reference quantum states with closed-form matrices and densities.

Five states are supported: vacuum, single photon, coherent(q0),
thermal(beta) and the even Schroedinger cat(q0).  Each exposes exact
density-matrix coefficients in the Fock basis and the quadrature density
p(x | phi) measured by homodyne detection.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "StateModel",
    "DensityMatrix",
    "ClassParams",
    "density_matrix",
    "quadrature_density",
    "class_envelope_check",
]

KINDS = ("vacuum", "single_photon", "coherent", "thermal", "cat")

# entries below this modulus are dropped from serialized output
_SERIALIZE_CUTOFF = 1e-15


@dataclass(frozen=True)
class StateModel:
    """A parameterized catalog state.  Immutable; share freely."""

    kind: str
    q0: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}, expected one of {KINDS}")
        if self.kind in ("coherent", "cat"):
            if self.q0 is None or not np.isfinite(self.q0):
                raise ValueError(f"{self.kind} state requires a finite amplitude q0")
            if self.kind == "cat" and self.q0 <= 0:
                raise ValueError("cat state requires q0 > 0")
        elif self.q0 is not None:
            raise ValueError(f"{self.kind} state takes no q0 parameter")
        if self.kind == "thermal":
            if self.beta is None or self.beta <= 0:
                raise ValueError("thermal state requires beta > 0")
        elif self.beta is not None:
            raise ValueError(f"{self.kind} state takes no beta parameter")

    @classmethod
    def vacuum(cls) -> "StateModel":
        return cls("vacuum")

    @classmethod
    def single_photon(cls) -> "StateModel":
        return cls("single_photon")

    @classmethod
    def coherent(cls, q0: float) -> "StateModel":
        return cls("coherent", q0=q0)

    @classmethod
    def thermal(cls, beta: float) -> "StateModel":
        return cls("thermal", beta=beta)

    @classmethod
    def cat(cls, q0: float) -> "StateModel":
        return cls("cat", q0=q0)

    def label(self) -> str:
        if self.kind == "coherent":
            return f"coherent(q0={self.q0:g})"
        if self.kind == "cat":
            return f"cat(q0={self.q0:g})"
        if self.kind == "thermal":
            return f"thermal(beta={self.beta:g})"
        return self.kind


@dataclass(frozen=True)
class DensityMatrix:
    """Truncated density matrix in the Fock basis.

    `entries[j, k]` holds the coefficient at row j, column k.  The array
    is never mutated after construction.
    """

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 1:
            raise ValueError("entries must be a nonempty square matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def norm2(self) -> float:
        """Entrywise l2 (Frobenius) norm."""
        return float(np.linalg.norm(self.entries))

    def is_hermitian(self, atol: float = 0.0) -> bool:
        return bool(np.allclose(self.entries, self.entries.conj().T, rtol=0.0, atol=atol))

    def to_json_dict(self) -> dict:
        ent = []
        for j in range(self.dim):
            for k in range(self.dim):
                v = self.entries[j, k]
                if abs(v) > _SERIALIZE_CUTOFF:
                    ent.append([j, k, float(v.real), float(v.imag)])
        return {"dim": self.dim, "entries": ent}

    @classmethod
    def from_json_dict(cls, d: dict) -> "DensityMatrix":
        m = np.zeros((d["dim"], d["dim"]), dtype=complex)
        for j, k, re, im in d["entries"]:
            m[j, k] = re + 1j * im
        return cls(m)

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["j", "k", "re", "im"])
            for j, k, re, im in self.to_json_dict()["entries"]:
                w.writerow([j, k, f"{re:.17g}", f"{im:.17g}"])


@dataclass(frozen=True)
class ClassParams:
    """Envelope parameters of the rapid-decay matrix class.

    Matrices in the class satisfy |rho_{m,n}| <= C exp(-B (m+n)^(r/2)).
    """

    C: float
    B: float
    r: float

    def __post_init__(self):
        if self.C < 1:
            raise ValueError("C must be >= 1")
        if self.B <= 0:
            raise ValueError("B must be > 0")
        if not 0 < self.r <= 2:
            raise ValueError("r must lie in (0, 2]")


def density_matrix(state: StateModel, dim: int) -> DensityMatrix:
    """Exact truncation of the state's infinite density matrix.

    Coherent and cat entries are computed in log space; the coherent
    normalization is exp(-q0^2/2), the unique choice with unit trace that
    is consistent with the Gaussian quadrature density of mean
    q0 cos(phi).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    m = np.zeros((dim, dim), dtype=complex)
    if state.kind == "vacuum":
        m[0, 0] = 1.0
    elif state.kind == "single_photon":
        if dim >= 2:
            m[1, 1] = 1.0
    elif state.kind == "coherent":
        q0 = state.q0
        if q0 == 0.0:
            m[0, 0] = 1.0
        else:
            idx = np.arange(dim)
            # rho_{j,k} = exp(-q0^2/2) (q0/sqrt2)^(j+k) / sqrt(j! k!)
            log_half = idx * np.log(abs(q0) / np.sqrt(2.0)) - 0.5 * gammaln(idx + 1)
            sign = np.sign(q0) ** idx
            col = sign * np.exp(-0.25 * q0 * q0 + log_half)
            m[:, :] = np.outer(col, col)
    elif state.kind == "thermal":
        k = np.arange(dim)
        np.fill_diagonal(m, (1.0 - np.exp(-state.beta)) * np.exp(-state.beta * k))
    elif state.kind == "cat":
        q0 = state.q0
        idx = np.arange(0, dim, 2)
        log_half = idx * np.log(q0 / np.sqrt(2.0)) - 0.5 * gammaln(idx + 1)
        denom = np.exp(q0 * q0 / 2.0) + np.exp(-q0 * q0 / 2.0)
        col = np.exp(log_half)
        sub = 2.0 * np.outer(col, col) / denom
        m[np.ix_(idx, idx)] = sub
    return DensityMatrix(m)


def quadrature_density(state: StateModel, x, phi: float):
    """Quadrature density p(x | phi) of the ideal homodyne measurement.

    Args:
        x: point(s) at which to evaluate; scalar or array.
        phi: phase in [0, pi].

    Returns:
        density value(s), same shape as x.
    """
    if not 0.0 <= phi <= np.pi:
        raise ValueError("phi must lie in [0, pi]")
    x = np.asarray(x, dtype=float)
    if state.kind == "vacuum":
        p = np.exp(-x * x) / np.sqrt(np.pi)
    elif state.kind == "single_photon":
        p = 2.0 * x * x * np.exp(-x * x) / np.sqrt(np.pi)
    elif state.kind == "coherent":
        mu = state.q0 * np.cos(phi)
        p = np.exp(-((x - mu) ** 2)) / np.sqrt(np.pi)
    elif state.kind == "thermal":
        th = np.tanh(state.beta / 2.0)
        p = np.sqrt(th / np.pi) * np.exp(-x * x * th)
    else:  # cat
        q0 = state.q0
        mu = q0 * np.cos(phi)
        s = np.sin(phi)
        num = (
            np.exp(-((x - mu) ** 2))
            + np.exp(-((x + mu) ** 2))
            + 2.0 * np.cos(2.0 * q0 * x * s) * np.exp(-x * x - q0 * q0 * np.cos(phi) ** 2)
        )
        p = num / (2.0 * np.sqrt(np.pi) * (1.0 + np.exp(-q0 * q0)))
    return p if p.ndim else float(p)


def class_envelope_check(m: DensityMatrix, p: ClassParams) -> bool:
    """True iff every entry satisfies |rho_{j,k}| <= C exp(-B (j+k)^(r/2))."""
    d = m.dim
    jk = np.add.outer(np.arange(d), np.arange(d)).astype(float)
    envelope = p.C * np.exp(-p.B * jk ** (p.r / 2.0))
    return bool(np.all(np.abs(m.entries) <= envelope))
