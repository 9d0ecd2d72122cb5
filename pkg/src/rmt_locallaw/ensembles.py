"""Variance profiles, entry distributions and Hermitian matrix sampling.

A variance profile is the doubly stochastic matrix of entry variances
sigma^2_ij (each column sums to one); an entry distribution is a standardized
(mean 0, variance 1) law. Together with a symmetry class beta in {1, 2} and a
seed they determine one Hermitian sample, reproducibly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc

from .errors import (
    ConvergenceError,
    DegenerateProfileError,
    NotFoundError,
    SamplingError,
)
from .seeding import generator

__all__ = [
    "VarianceProfile",
    "EntryDistribution",
    "MatrixSample",
    "ProfileReport",
    "wigner_profile",
    "band_profile",
    "validate_profile",
    "catalog_distribution",
    "sample_matrix",
]

_COLSUM_TOL = 1e-12
_SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class VarianceProfile:
    """Matrix of entry variances with derived spectral parameters.

    m_param = 1 / max_ij sigma^2_ij; c_inf / c_sup = N * min / max variance;
    delta_plus / delta_minus measure the gap of Spec(Sigma) below 1 and
    above -1.
    """

    n: int
    variances: np.ndarray
    m_param: float
    c_inf: float
    c_sup: float
    sigma_spectrum: np.ndarray
    delta_minus: float
    delta_plus: float
    profile_id: str = "custom"

    @classmethod
    def from_variances(cls, variances, profile_id: str = "custom", validate: bool = True) -> "VarianceProfile":
        var = np.array(variances, dtype=float)
        if var.ndim != 2 or var.shape[0] != var.shape[1] or var.shape[0] < 1:
            raise ValueError(f"variances must be a square grid, got shape {var.shape}")
        n = var.shape[0]
        var.setflags(write=False)
        vmax = float(var.max())
        spectrum = np.sort(np.linalg.eigvalsh(var))
        if n >= 2:
            delta_plus = float(1.0 - spectrum[-2])
            delta_minus = float(1.0 + spectrum[0])
        else:
            delta_plus = delta_minus = 1.0
        prof = cls(
            n=n,
            variances=var,
            m_param=(1.0 / vmax) if vmax > 0 else math.inf,
            c_inf=float(n * var.min()),
            c_sup=float(n * vmax),
            sigma_spectrum=spectrum,
            delta_minus=delta_minus,
            delta_plus=delta_plus,
            profile_id=profile_id,
        )
        if validate:
            report = validate_profile(prof)
            if report.violations:
                raise ValueError("invalid variance profile: " + "; ".join(report.violations))
        return prof

    def column_sum_residual(self) -> float:
        return float(np.max(np.abs(self.variances.sum(axis=0) - 1.0)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "variance-profile",
                "profile_id": self.profile_id,
                "n": self.n,
                "variances": self.variances.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "VarianceProfile":
        obj = json.loads(text)
        if obj.get("schema") != "variance-profile":
            raise ValueError("not a variance-profile document")
        return cls.from_variances(obj["variances"], profile_id=obj.get("profile_id", "custom"), validate=False)


@dataclass
class ProfileReport:
    """validate_profile output: residuals, gap estimates, (VV) flag, edge class.

    violations lists structural defects (asymmetry, column sums, negativity,
    spectrum range); the spectral-gap conditions are reported as flags since
    degenerate-but-stochastic profiles are still samplable.
    """

    colsum_residual: float
    symmetry_residual: float
    delta_plus: float
    delta_minus: float
    vv_holds: bool
    edge_exponent_a: int
    top_eigenvalue_simple: bool
    violations: list


def validate_profile(p: VarianceProfile) -> ProfileReport:
    """Report-only check of the profile conditions; never raises."""
    var = p.variances
    violations = []
    sym = float(np.max(np.abs(var - var.T))) if p.n else 0.0
    if sym > _COLSUM_TOL:
        violations.append(f"variances not symmetric (residual {sym:.3g})")
    colres = p.column_sum_residual()
    if colres > _COLSUM_TOL:
        violations.append(f"column sums deviate from 1 by {colres:.3g}")
    if np.any(var < 0):
        violations.append("negative variances")
    spec = p.sigma_spectrum
    if abs(spec[-1] - 1.0) > _SPECTRUM_TOL:
        violations.append(f"largest Sigma eigenvalue {spec[-1]!r} != 1")
    if spec[0] < -1.0 - _SPECTRUM_TOL or spec[-1] > 1.0 + _SPECTRUM_TOL:
        violations.append("Sigma spectrum escapes [-1, 1]")
    simple = bool(p.n < 2 or spec[-2] <= 1.0 - 1e-12)
    vv = p.c_inf > 0 and np.isfinite(p.c_sup)
    return ProfileReport(
        colsum_residual=colres,
        symmetry_residual=sym,
        delta_plus=p.delta_plus,
        delta_minus=p.delta_minus,
        vv_holds=bool(vv),
        edge_exponent_a=1 if vv else 2,
        top_eigenvalue_simple=simple,
        violations=violations,
    )


def wigner_profile(n: int) -> VarianceProfile:
    """Flat profile sigma^2_ij = 1/n (standard Wigner normalization)."""
    if n < 1:
        raise ValueError(f"matrix dimension must be >= 1, got {n}")
    return VarianceProfile.from_variances(np.full((n, n), 1.0 / n), profile_id=f"wigner-{n}")


def band_profile(n: int, w: int, shape: Callable[[float], float], max_iter: int = 50) -> VarianceProfile:
    """Band profile from a symmetric nonnegative shape function.

    Raw weights shape(d/w)/w at circular distance d = min(i-j mod n, j-i mod n),
    then columns are rescaled to sum exactly to one and re-symmetrized
    (Sinkhorn-style, <= max_iter rounds, tolerance 1e-12).
    """
    if not 1 <= w <= n:
        raise ValueError(f"bandwidth must satisfy 1 <= w <= n, got w={w}, n={n}")
    dists = np.arange(n // 2 + 1, dtype=float)
    weights = np.array([float(shape(d / w)) for d in dists]) / w
    if np.any(weights < 0):
        raise ValueError("shape function must be nonnegative")
    if not np.any(weights > 0):
        raise DegenerateProfileError("shape vanished on the whole sampled lattice")
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    d = np.minimum(d, n - d)
    var = weights[d]
    for _ in range(max_iter):
        colsums = var.sum(axis=0)
        if np.any(colsums <= 0):
            raise DegenerateProfileError("a column of the band profile has zero mass")
        var = var / colsums[None, :]
        var = 0.5 * (var + var.T)
        if np.max(np.abs(var.sum(axis=0) - 1.0)) < _COLSUM_TOL:
            break
    else:
        raise ConvergenceError("band profile normalization did not reach 1e-12 in 50 rounds")
    return VarianceProfile.from_variances(var, profile_id=f"band-{n}-{w}")


_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EntryDistribution:
    """Standardized entry law (mean 0, variance 1) with known moments and tails.

    kind is one of bernoulli | gaussian | uniform | discrete-atoms |
    gaussian-divisible; atoms holds (value, probability) pairs for the two
    discrete kinds, and gamma is the Gaussian mixing weight for
    gaussian-divisible laws: xi = sqrt(1-gamma)*atom_law + sqrt(gamma)*N(0,1).
    """

    kind: str
    atoms: tuple | None
    m3: float
    m4: float
    subexp_alpha: float
    subexp_beta: float
    gamma: float = 0.0
    dist_id: str = ""

    def __post_init__(self):
        if self.kind in ("discrete-atoms", "gaussian-divisible"):
            if not self.atoms:
                raise ValueError(f"{self.kind} law requires atoms")
            probs = np.array([p for _, p in self.atoms])
            if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs < -1e-15):
                raise ValueError("atom probabilities must be nonnegative and sum to 1")
        if self.m4 - self.m3**2 - 1.0 < -1e-12:
            raise ValueError(f"infeasible moments: m4 - m3^2 - 1 = {self.m4 - self.m3 ** 2 - 1.0:.3g} < 0")
        if not self.dist_id:
            object.__setattr__(self, "dist_id", self.kind)

    def atom_moment(self, k: int) -> float:
        vals = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return float(np.sum(probs * vals**k))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "bernoulli":
            return 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0
        if self.kind == "uniform":
            return rng.uniform(-_SQRT3, _SQRT3, size=size)
        if self.kind == "discrete-atoms":
            return self._sample_atoms(rng, size)
        if self.kind == "gaussian-divisible":
            base = self._sample_atoms(rng, size)
            g = rng.standard_normal(size)
            return math.sqrt(1.0 - self.gamma) * base + math.sqrt(self.gamma) * g
        raise NotFoundError(f"cannot sample kind {self.kind!r}")

    def _sample_atoms(self, rng, size):
        vals = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        u = rng.random(size)
        return vals[np.searchsorted(cum, u, side="right").clip(0, len(vals) - 1)]

    def tail(self, u) -> np.ndarray:
        """Strict tail P(|xi| > u), exact for every catalog kind."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            out = erfc(u / math.sqrt(2.0))
        elif self.kind == "uniform":
            out = np.clip(1.0 - u / _SQRT3, 0.0, 1.0)
        elif self.kind in ("bernoulli", "discrete-atoms"):
            vals = np.array([abs(v) for v, _ in self.atoms])
            probs = np.array([p for _, p in self.atoms])
            out = np.sum(probs[None, :] * (vals[None, :] > np.atleast_1d(u)[:, None]), axis=1)
            out = out.reshape(u.shape)
        elif self.kind == "gaussian-divisible":
            c1 = math.sqrt(1.0 - self.gamma)
            c2 = math.sqrt(self.gamma)
            uu = np.atleast_1d(u)[:, None]
            vals = np.array([v for v, _ in self.atoms])[None, :]
            probs = np.array([p for _, p in self.atoms])[None, :]
            if c2 == 0:
                return self.tail(u)
            upper = 0.5 * erfc((uu - c1 * vals) / (c2 * math.sqrt(2.0)))
            lower = 0.5 * erfc((uu + c1 * vals) / (c2 * math.sqrt(2.0)))
            out = np.sum(probs * (upper + lower), axis=1).reshape(u.shape)
        else:
            raise NotFoundError(f"no tail formula for kind {self.kind!r}")
        return out if out.ndim else float(out)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "entry-distribution",
                "kind": self.kind,
                "atoms": [list(a) for a in self.atoms] if self.atoms else None,
                "m3": self.m3,
                "m4": self.m4,
                "subexp_alpha": self.subexp_alpha,
                "subexp_beta": self.subexp_beta,
                "gamma": self.gamma,
                "dist_id": self.dist_id,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "EntryDistribution":
        obj = json.loads(text)
        if obj.get("schema") != "entry-distribution":
            raise ValueError("not an entry-distribution document")
        atoms = tuple(tuple(a) for a in obj["atoms"]) if obj.get("atoms") else None
        return cls(
            kind=obj["kind"],
            atoms=atoms,
            m3=obj["m3"],
            m4=obj["m4"],
            subexp_alpha=obj["subexp_alpha"],
            subexp_beta=obj["subexp_beta"],
            gamma=obj.get("gamma", 0.0),
            dist_id=obj.get("dist_id", ""),
        )


def catalog_distribution(name: str) -> EntryDistribution:
    """Catalog of standardized laws: bernoulli, gaussian, uniform."""
    if name == "bernoulli":
        return EntryDistribution(
            kind="bernoulli", atoms=((1.0, 0.5), (-1.0, 0.5)), m3=0.0, m4=1.0,
            subexp_alpha=1.0, subexp_beta=math.e,
        )
    if name == "gaussian":
        return EntryDistribution(
            kind="gaussian", atoms=None, m3=0.0, m4=3.0,
            subexp_alpha=1.0, subexp_beta=2.0,
        )
    if name == "uniform":
        return EntryDistribution(
            kind="uniform", atoms=None, m3=0.0, m4=9.0 / 5.0,
            subexp_alpha=1.0, subexp_beta=math.e,
        )
    raise NotFoundError(f"unknown distribution {name!r}")


_MAGIC = b"RMT1"


@dataclass(frozen=True)
class MatrixSample:
    """One Hermitian sample tied to its profile, distribution and seed."""

    symmetry_class: int
    entries: np.ndarray
    profile_id: str
    dist_id: str
    seed: int

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def to_bytes(self) -> bytes:
        """Binary export: 'RMT1' | uint32 n | uint32 beta | uint64 seed | planes.

        Planes are row-major little-endian float64: the real plane, then the
        imaginary plane for beta = 2.
        """
        head = _MAGIC + struct.pack("<IIQ", self.n, self.symmetry_class, self.seed & (2**64 - 1))
        real = self.entries.real.astype("<f8").tobytes()
        if self.symmetry_class == 2:
            return head + real + self.entries.imag.astype("<f8").tobytes()
        return head + real

    @classmethod
    def from_bytes(cls, blob: bytes, profile_id: str = "", dist_id: str = "") -> "MatrixSample":
        if blob[:4] != _MAGIC:
            raise ValueError("bad magic; not an RMT1 matrix blob")
        n, beta, seed = struct.unpack("<IIQ", blob[4:20])
        plane = n * n * 8
        real = np.frombuffer(blob[20 : 20 + plane], dtype="<f8").reshape(n, n)
        if beta == 2:
            imag = np.frombuffer(blob[20 + plane : 20 + 2 * plane], dtype="<f8").reshape(n, n)
            entries = real + 1j * imag
        else:
            entries = real.copy()
        entries.setflags(write=False)
        return cls(symmetry_class=beta, entries=entries, profile_id=profile_id, dist_id=dist_id, seed=seed)


def sample_matrix(p: VarianceProfile, d: EntryDistribution, beta: int, seed: int) -> MatrixSample:
    """Draw one Hermitian (beta=2) or real symmetric (beta=1) sample.

    Entry (i, j), i < j, is an independent standardized draw scaled to
    variance sigma^2_ij (real and imaginary parts each sigma^2_ij/2 for
    beta=2); the diagonal is real with variance sigma^2_ii. All randomness is
    a pure function of (profile, distribution, beta, seed).
    """
    if beta not in (1, 2):
        raise SamplingError(f"symmetry class must be 1 or 2, got {beta}")
    if p.column_sum_residual() > 1e-8:
        raise SamplingError("profile violates the column-sum normalization")
    n = p.n
    rng = generator(seed, p.profile_id, d.dist_id, beta)
    sigma = np.sqrt(p.variances)
    x = d.sample(rng, (n, n))
    if beta == 2:
        y = d.sample(rng, (n, n))
        h = np.zeros((n, n), dtype=complex)
        iu = np.triu_indices(n, 1)
        h[iu] = sigma[iu] * (x[iu] + 1j * y[iu]) / math.sqrt(2.0)
        h[(iu[1], iu[0])] = h[iu].conj()
    else:
        h = np.zeros((n, n), dtype=float)
        iu = np.triu_indices(n, 1)
        h[iu] = sigma[iu] * x[iu]
        h[(iu[1], iu[0])] = h[iu]
    di = np.diag_indices(n)
    h[di] = sigma[di] * x[di]
    h.setflags(write=False)
    return MatrixSample(symmetry_class=beta, entries=h, profile_id=p.profile_id, dist_id=d.dist_id, seed=seed)
