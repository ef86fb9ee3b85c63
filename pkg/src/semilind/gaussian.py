"""Gaussian and complex-Gaussian Wigner states on phase space.

Conventions (single source of truth for the whole package):

* phase-space ordering  x = (q_1..q_n, p_1..p_n)
* a real Gaussian state has  W(x) = sqrt(det G)/(pi hbar)^n
  * exp(-(x - X) . G (x - X) / hbar), so the symmetrized covariance is
  hbar * G^{-1}
* a complex Gaussian component evaluates to
  weight * exp(i/hbar [ (x-X) . B (x-X)/2 + Y . (x-X) + alpha ]),
  with B complex symmetric, Im B > 0; all prefactors live in ``weight``
* mode variables a_j = (q_j + i p_j)/sqrt(2)
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .symbols import symplectic_form

__all__ = [
    "GaussianWigner",
    "ComplexGaussian",
    "SuperpositionState",
    "CovarianceBlocks",
    "Moments",
    "GridSpec",
    "WignerGrid",
    "PhysicalityReport",
    "coherent",
    "g_from_a",
    "cat_decompose",
    "eval_wigner",
    "moments",
    "check_physical",
    "transformation_matrix",
]

_SYM_TOL = 1e-12
_PHYS_TOL = -1e-9


def transformation_matrix(n_modes: int) -> np.ndarray:
    """Unitary T mapping (q, p) blocks to (a, abar) blocks."""
    eye = np.eye(n_modes)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2.0)


def _check_symmetric(mat: np.ndarray, what: str):
    if np.max(np.abs(mat - mat.T)) > _SYM_TOL * max(1.0, np.max(np.abs(mat))):
        raise ValueError(f"{what} must be symmetric")


@dataclass(frozen=True)
class GaussianWigner:
    """Real Gaussian Wigner state: centre X, width matrix G, and hbar."""

    hbar: float
    x: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if x.ndim != 1 or x.size % 2:
            raise ValueError("centre must be a real vector of even length")
        if g.shape != (x.size, x.size):
            raise ValueError("width matrix shape does not match centre")
        _check_symmetric(g, "width matrix G")
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("width matrix G must be positive definite")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", 0.5 * (g + g.T))

    @property
    def n_modes(self) -> int:
        return self.x.size // 2

    def values(self, pts: np.ndarray) -> np.ndarray:
        """Wigner values at points of shape (..., 2n)."""
        delta = pts - self.x
        quad = np.einsum("...i,ij,...j->...", delta, self.g, delta)
        norm = np.sqrt(np.linalg.det(self.g)) / (np.pi * self.hbar) ** self.n_modes
        return norm * np.exp(-quad / self.hbar)

    def covariance(self) -> np.ndarray:
        """Symmetrized covariance matrix hbar * G^{-1}."""
        return self.hbar * np.linalg.inv(self.g)


@dataclass(frozen=True)
class PhysicalityReport:
    min_eig: float
    passed: bool
    tol: float = _PHYS_TOL


def check_physical(state: GaussianWigner) -> PhysicalityReport:
    """Uncertainty-relation check: min eig of G^{-1} + i Omega >= tol."""
    return physicality_of_width(state.g)


def physicality_of_width(g: np.ndarray) -> PhysicalityReport:
    n = g.shape[0] // 2
    m = np.linalg.inv(g) + 1j * symplectic_form(n)
    min_eig = float(np.linalg.eigvalsh(m).min())
    return PhysicalityReport(min_eig=min_eig, passed=min_eig >= _PHYS_TOL)


def coherent(n_modes: int, a0, hbar: float = 1.0) -> GaussianWigner:
    """Coherent state with mode amplitudes a0: X = sqrt(2)(Re a0, Im a0), G = I."""
    a0 = np.atleast_1d(np.asarray(a0, dtype=complex))
    if a0.size != n_modes:
        raise ValueError("amplitude count must match mode count")
    x = np.sqrt(2.0) * np.concatenate([a0.real, a0.imag])
    return GaussianWigner(hbar=hbar, x=x, g=np.eye(2 * n_modes))


def g_from_a(width: np.ndarray) -> np.ndarray:
    """Real width matrix from a complex symmetric matrix with Im > 0.

    [[Im W + Re W (Im W)^-1 Re W, -Re W (Im W)^-1],
     [-(Im W)^-1 Re W,            (Im W)^-1      ]]

    Applies both to the position-space packet width A (n x n -> 2n x 2n)
    and to the doubled-space width B (2n x 2n -> 4n x 4n).
    """
    width = np.atleast_2d(np.asarray(width, dtype=complex))
    _check_symmetric(width, "width")
    re, im = width.real, width.imag
    if np.linalg.eigvalsh(im).min() <= 0:
        raise ValueError("imaginary part of the width must be positive definite")
    im_inv = np.linalg.inv(im)
    return np.block([[im + re @ im_inv @ re, -re @ im_inv], [-im_inv @ re, im_inv]])


@dataclass(frozen=True)
class ComplexGaussian:
    """One complex Gaussian component of a superposition Wigner function.

    z = (X, Y) stacks the centre and the oscillation wave vector;
    evaluation is weight * exp(i/hbar [ d.Bd/2 + Y.d + alpha ]), d = x - X.
    """

    hbar: float
    z: np.ndarray
    b: np.ndarray
    alpha: complex
    weight: complex

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        b = np.asarray(self.b, dtype=complex)
        if z.ndim != 1 or z.size % 4:
            raise ValueError("z must stack (X, Y), length 4n")
        dim = z.size // 2
        if b.shape != (dim, dim):
            raise ValueError("B shape does not match z")
        _check_symmetric(b, "B")
        if np.linalg.eigvalsh(b.imag).min() <= 0:
            raise ValueError("Im B must be positive definite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "b", 0.5 * (b + b.T))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "weight", complex(self.weight))

    @property
    def n_modes(self) -> int:
        return self.z.size // 4

    @property
    def x(self) -> np.ndarray:
        return self.z[: self.z.size // 2]

    @property
    def y(self) -> np.ndarray:
        return self.z[self.z.size // 2:]

    def values(self, pts: np.ndarray) -> np.ndarray:
        delta = pts - self.x
        quad = np.einsum("...i,ij,...j->...", delta, self.b, delta)
        lin = delta @ self.y
        return self.weight * np.exp(1j / self.hbar * (0.5 * quad + lin + self.alpha))

    def peak_magnitude(self) -> float:
        """Modulus at x = X; the size of the component's envelope."""
        return abs(self.weight) * float(np.exp(-self.alpha.imag / self.hbar))

    def _det_mi_b_sqrt(self) -> complex:
        # det(-iB)^(1/2) via principal roots of the eigenvalues; Im B > 0
        # confines them to the right half-plane, so the branch is unambiguous.
        eigs = np.linalg.eigvals(-1j * self.b)
        return complex(np.prod(np.sqrt(eigs)))

    def integral(self) -> complex:
        """Exact phase-space integral of the component."""
        dim = self.z.size // 2
        binv_y = np.linalg.solve(self.b, self.y)
        expo = 1j / self.hbar * (self.alpha - 0.5 * self.y @ binv_y)
        pref = (2 * np.pi * self.hbar) ** (dim // 2) / self._det_mi_b_sqrt()
        return self.weight * pref * np.exp(expo)

    def first_moment(self) -> np.ndarray:
        """Integral of x times the component (complex vector)."""
        binv_y = np.linalg.solve(self.b, self.y)
        return (self.x - binv_y) * self.integral()


@dataclass(frozen=True)
class SuperpositionState:
    """Finite sum of complex Gaussian components times a normalization factor."""

    components: tuple
    norm_factor: float = 1.0

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("superposition needs at least one component")
        hb = comps[0].hbar
        n = comps[0].n_modes
        if any(c.hbar != hb or c.n_modes != n for c in comps):
            raise ValueError("components disagree on hbar or mode count")
        object.__setattr__(self, "components", comps)

    @property
    def hbar(self) -> float:
        return self.components[0].hbar

    @property
    def n_modes(self) -> int:
        return self.components[0].n_modes

    def values(self, pts: np.ndarray) -> np.ndarray:
        total = sum(c.values(pts) for c in self.components)
        return self.norm_factor * total

    def integral(self) -> complex:
        return self.norm_factor * sum(c.integral() for c in self.components)

    def moments_xp(self) -> np.ndarray:
        """First moments (expectation of x) of the normalized distribution."""
        total = sum(c.integral() for c in self.components)
        first = sum(c.first_moment() for c in self.components)
        return np.real(first / total)

    def normalized(self) -> "SuperpositionState":
        raw = sum(c.integral() for c in self.components)
        return SuperpositionState(self.components, norm_factor=float(1.0 / raw.real))


def cat_decompose(centres, coeffs, width, hbar: float = 1.0) -> SuperpositionState:
    """Wigner decomposition of a superposition of position-space Gaussians.

    Each packet j sits at (q_j, p_j) with complex weight c_j and shared
    complex symmetric width matrix `width` (Im > 0).  Every ordered pair
    (i, j) contributes one complex Gaussian with

        X_ij = ((q_i+q_j)/2, (p_i+p_j)/2),  Y_ij = (p_j - p_i, q_i - q_j),
        alpha_ij = (p_i + p_j) . (q_i - q_j) / 2,  B = 2iG,

    and weight conj(c_i) c_j / (pi hbar)^n.  The i = j terms are the real
    Gaussian lobes; i != j carry the interference pattern.
    """
    centres = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centres]
    coeffs = [complex(c) for c in coeffs]
    if len(centres) != len(coeffs) or not centres:
        raise ValueError("need matching, non-empty centres and coefficients")
    n = centres[0].size // 2
    if any(c.size != 2 * n for c in centres):
        raise ValueError("centres must share one phase-space dimension")
    gmat = g_from_a(width)
    bmat = 2j * gmat
    pref = (np.pi * hbar) ** (-n)
    comps = []
    for i, (ci, zi) in enumerate(zip(coeffs, centres)):
        qi, pi = zi[:n], zi[n:]
        for j, (cj, zj) in enumerate(zip(coeffs, centres)):
            qj, pj = zj[:n], zj[n:]
            x_ij = np.concatenate([0.5 * (qi + qj), 0.5 * (pi + pj)])
            y_ij = np.concatenate([pj - pi, qi - qj])
            alpha_ij = 0.5 * float((pi + pj) @ (qi - qj))
            comps.append(
                ComplexGaussian(
                    hbar=hbar,
                    z=np.concatenate([x_ij, y_ij]),
                    b=bmat,
                    alpha=alpha_ij,
                    weight=np.conj(ci) * cj * pref,
                )
            )
    return SuperpositionState(tuple(comps)).normalized()


# -- grids --------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform (q, p) sampling grid; samples sit at cell centres (midpoint rule)."""

    q_min: float
    q_max: float
    n_q: int
    p_min: float
    p_max: float
    n_p: int

    def __post_init__(self):
        if self.n_q < 1 or self.n_p < 1 or self.q_max <= self.q_min or self.p_max <= self.p_min:
            raise ValueError("degenerate grid")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.q_min + self.dq * (np.arange(self.n_q) + 0.5)
        p = self.p_min + self.dp * (np.arange(self.n_p) + 0.5)
        return q, p

    def points(self) -> np.ndarray:
        q, p = self.axes()
        qq, pp = np.meshgrid(q, p, indexing="ij")
        return np.stack([qq, pp], axis=-1)


@dataclass(frozen=True)
class WignerGrid:
    """Sampled Wigner values on a GridSpec; values[i_q, i_p]."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (self.spec.n_q, self.spec.n_p):
            raise ValueError("value matrix does not match the grid spec")
        object.__setattr__(self, "values", vals)

    def integral(self) -> float | complex:
        total = self.values.sum() * self.spec.dq * self.spec.dp
        return complex(total) if np.iscomplexobj(self.values) else float(total)

    def sup_diff(self, other: "WignerGrid") -> float:
        if self.spec != other.spec:
            raise ValueError("grids must share one spec")
        return float(np.max(np.abs(self.values - other.values)))

    def to_text(self) -> str:
        s = self.spec
        lines = [
            f"# {s.q_min!r} {s.q_max!r} {s.n_q}",
            f"# {s.p_min!r} {s.p_max!r} {s.n_p}",
        ]
        for row in self.values:
            lines.append(" ".join(repr(complex(v)) if np.iscomplexobj(self.values) else repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WignerGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        qm, qx, nq = lines[0].lstrip("# ").split()
        pm, px, np_ = lines[1].lstrip("# ").split()
        spec = GridSpec(float(qm), float(qx), int(nq), float(pm), float(px), int(np_))
        rows = [[complex(tok) for tok in ln.split()] for ln in lines[2:]]
        vals = np.array(rows)
        if np.all(vals.imag == 0):
            vals = vals.real
        return cls(spec, vals)

    def to_json(self) -> str:
        s = self.spec
        doc = {
            "q": [s.q_min, s.q_max, s.n_q],
            "p": [s.p_min, s.p_max, s.n_p],
            "values_re": np.real(self.values).ravel().tolist(),
        }
        if np.iscomplexobj(self.values):
            doc["values_im"] = np.imag(self.values).ravel().tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "WignerGrid":
        doc = json.loads(text)
        spec = GridSpec(*doc["q"][:2], int(doc["q"][2]), *doc["p"][:2], int(doc["p"][2]))
        vals = np.array(doc["values_re"], dtype=float)
        if "values_im" in doc:
            vals = vals + 1j * np.array(doc["values_im"])
        return cls(spec, vals.reshape(spec.n_q, spec.n_p))


def eval_wigner(state, spec: GridSpec) -> WignerGrid:
    """Sample a state's Wigner function on a grid (single mode).

    For a SuperpositionState the summed real part is returned; a lone
    ComplexGaussian keeps its complex values.  Warns when the boundary
    values are not negligible against the peak.
    """
    n_modes = state.n_modes
    if n_modes != 1:
        raise ValueError("grid evaluation is defined for single-mode states")
    pts = spec.points()
    vals = state.values(pts)
    if isinstance(state, (GaussianWigner, SuperpositionState)):
        vals = np.real(vals)
    peak = np.max(np.abs(vals))
    border = max(
        np.max(np.abs(vals[0, :])),
        np.max(np.abs(vals[-1, :])),
        np.max(np.abs(vals[:, 0])),
        np.max(np.abs(vals[:, -1])),
    )
    if peak > 0 and border > 1e-6 * peak:
        warnings.warn("grid boundary value exceeds 1e-6 of the peak; enlarge the grid")
    return WignerGrid(spec, vals)


# -- moments ------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceBlocks:
    """Mode-frame covariance blocks of Sigma = T Cov T^dag."""

    alpha_block: np.ndarray
    beta_block: np.ndarray


@dataclass(frozen=True)
class Moments:
    """First moments plus mode covariance blocks of a Gaussian state."""

    hbar: float
    x: np.ndarray
    modes: np.ndarray  # <a_j>
    blocks: CovarianceBlocks

    def adag_a(self, i: int, j: int) -> complex:
        """Normally ordered pair correlator <adag_i a_j>."""
        alpha = self.blocks.alpha_block[i, j]
        delta = self.hbar if i == j else 0.0
        return 0.5 * (alpha + 2.0 * np.conj(self.modes[i]) * self.modes[j] - delta)

    def occupation(self, j: int) -> float:
        return float(np.real(self.adag_a(j, j)))

    def g1(self, i: int, j: int) -> float:
        """First-order coherence |<adag_i a_j>| / sqrt(<n_i><n_j>)."""
        den = self.occupation(i) * self.occupation(j)
        return float(abs(self.adag_a(i, j)) / np.sqrt(den))


def moments(state: GaussianWigner) -> Moments:
    """Moment table of a Gaussian state in the mode frame."""
    n = state.n_modes
    t = transformation_matrix(n)
    cov = state.covariance()
    sigma = t @ cov @ t.conj().T
    xc = t @ state.x
    return Moments(
        hbar=state.hbar,
        x=state.x.copy(),
        modes=xc[:n],
        blocks=CovarianceBlocks(alpha_block=sigma[n:, n:], beta_block=sigma[n:, :n]),
    )
