"""From spectral densities to chain coefficients and back.

A bath is described by a spectral density J(omega) on a finite support.  The
polynomials orthonormal under J define a unitary rotation of the bath modes
into a nearest-neighbour chain; the three-term recurrence coefficients of
those polynomials are exactly the chain's on-site energies and hoppings, and
the total weight fixes the system-chain coupling c0 = sqrt(int J).

Coefficients are computed by a discretized Stieltjes procedure: the measure
J(omega) d(omega) is replaced by a Gauss-Legendre quadrature rule on graded
panels (accumulating toward integrable singularities and kinks), and the
Jacobi matrix is obtained by Lanczos iteration with full reorthogonalization
on the diagonal node matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.special

__all__ = [
    "SpectralDensity",
    "OhmicSD",
    "TabulatedSD",
    "ThermalizedSD",
    "ChainCoefficients",
    "OrthonormalPolyBasis",
    "TemperatureSpec",
    "thermalized_sd",
    "chaincoeffs_from_sd",
    "chaincoeffs_ohmic_analytic",
    "chaincoeffs_fermionic",
    "find_chain_length",
    "verify_chain_length",
    "ChainLengthCheck",
    "chain_to_mode_transform",
    "basis_from_sd",
    "reorganization_energy",
    "quadrature_convergence",
    "load_spectral_density",
    "write_chain_coefficients",
    "read_chain_coefficients",
]

GRADING_DEPTH = 44  # dyadic panels down to ~6e-14 of the interval width


# ------------------------------------------------------------------ panels


def _graded_panels(a: float, b: float, toward: float) -> list[tuple[float, float]]:
    """Dyadic panels of [a, b] accumulating toward one endpoint."""
    width = b - a
    if width <= 0:
        return []
    pts = [2.0**-k * width for k in range(GRADING_DEPTH, 0, -1)]
    if toward == a:
        cuts = [a] + [a + p for p in pts] + [b]
    else:
        cuts = [a] + [b - p for p in reversed(pts)] + [b]
    return list(zip(cuts[:-1], cuts[1:]))


def _graded_both(a: float, b: float) -> list[tuple[float, float]]:
    mid = 0.5 * (a + b)
    return _graded_panels(a, mid, toward=a) + _graded_panels(mid, b, toward=b)


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _composite_grid(
    panels: Sequence[tuple[float, float]], budget: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights over panels, allocating the node budget
    proportionally to panel width (floor 5 per panel) so that graded panel
    sets do not starve the wide panels that carry the weight."""
    panels = [(a, b) for a, b in panels if b > a]
    widths = np.array([b - a for a, b in panels])
    total = widths.sum()
    orders = np.minimum(512, np.maximum(5, np.ceil(budget * widths / total).astype(int)))
    nodes, weights = [], []
    for (a, b), order in zip(panels, orders):
        x, w = _leggauss(int(order))
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


# -------------------------------------------------------- spectral densities


class SpectralDensity:
    """Base interface: a nonnegative weight on a finite support interval."""

    support: tuple[float, float]

    def __call__(self, omega):  # pragma: no cover - abstract
        raise NotImplementedError

    def describe(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def quad_panels(self) -> list[tuple[float, float]]:
        return _graded_both(*self.support)

    def quad_rule(self, budget: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights discretizing the measure J(omega) d(omega).

        The default composite Gauss-Legendre grid over :meth:`quad_panels`
        suits piecewise-smooth densities; kinds with known endpoint power
        laws override this with an exact Gauss-Jacobi rule.
        """
        nodes, w = _composite_grid(self.quad_panels(), budget)
        return nodes, np.clip(w * np.asarray(self(nodes), dtype=float), 0.0, None)


@dataclass(frozen=True)
class OhmicSD(SpectralDensity):
    """J(omega) = 2 alpha omega_c (omega/omega_c)^s on [0, omega_c]."""

    alpha: float
    s: float
    omega_c: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive")
        if not (self.s > -1 and math.isfinite(self.s)):
            raise ValueError("ohmicity s must exceed -1")
        if not (self.omega_c > 0 and math.isfinite(self.omega_c)):
            raise ValueError("omega_c must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.omega_c)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        inside = (omega >= 0.0) & (omega <= self.omega_c)
        scaled = np.where(inside, np.abs(omega) / self.omega_c, 1.0)
        values = 2.0 * self.alpha * self.omega_c * scaled**self.s
        return np.where(inside, values, 0.0)

    def describe(self) -> dict:
        return {"kind": "ohmic", "alpha": self.alpha, "s": self.s, "omega_c": self.omega_c}

    def quad_panels(self):
        # the only non-smooth point inside the support is omega = 0
        return _graded_panels(0.0, self.omega_c, toward=0.0)

    def quad_rule(self, budget):
        # Gauss-Jacobi with weight (1+x)^s absorbs the power law exactly, so
        # the discrete Jacobi matrix is the continuous one to machine
        # precision for every resolvable order.
        m = max(int(budget), 20)
        x, v = scipy.special.roots_jacobi(m, 0.0, self.s)
        nodes = 0.5 * (x + 1.0) * self.omega_c
        weights = v * (2.0 * self.alpha * self.omega_c) * (self.omega_c / 2.0) * 2.0**-self.s
        return nodes, weights


@dataclass(frozen=True)
class TabulatedSD(SpectralDensity):
    """Piecewise-linear interpolation of a sampled spectral density.

    Values are clamped to >= 0 on evaluation, which is the simplest
    monotone-safe treatment for measured data.
    """

    omegas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if omegas.ndim != 1 or omegas.size < 2 or omegas.shape != values.shape:
            raise ValueError("tabulated SD needs matching 1-d grids of length >= 2")
        if not np.all(np.diff(omegas) > 0):
            raise ValueError("tabulated SD grid must be strictly ascending")
        if not (np.all(np.isfinite(omegas)) and np.all(np.isfinite(values))):
            raise ValueError("tabulated SD entries must be finite")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "values", values)

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.omegas[0]), float(self.omegas[-1]))

    def __call__(self, omega):
        out = np.interp(np.asarray(omega, dtype=float), self.omegas, self.values)
        return np.clip(out, 0.0, None)

    def describe(self) -> dict:
        return {"kind": "table", "points": int(self.omegas.size), "support": list(self.support)}

    def quad_panels(self):
        return list(zip(self.omegas[:-1], self.omegas[1:]))


@dataclass(frozen=True)
class ThermalizedSD(SpectralDensity):
    """Finite-temperature extension of a positive-support density.

    J_beta(omega) = sign(omega) J(|omega|) / (1 - exp(-beta omega)) on the
    mirrored support.  The formula satisfies detailed balance
    J_beta(-omega) = exp(-beta omega) J_beta(omega) identically and tends to
    the base density on omega > 0 as beta grows.
    """

    base: SpectralDensity
    beta: float

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if self.base.support[0] < 0:
            raise ValueError("thermalization requires a base SD supported on omega >= 0")
        # J(omega)/omega must stay integrable at 0 or the thermal weight diverges
        if isinstance(self.base, OhmicSD) and self.base.s <= 0:
            raise ValueError("cannot thermalize an ohmic SD with s <= 0: J/omega diverges")
        if (
            isinstance(self.base, TabulatedSD)
            and self.base.support[0] == 0.0
            and self.base.values[0] > 0.0
        ):
            raise ValueError("cannot thermalize a tabulated SD with J(0) > 0: J/omega diverges")

    @property
    def support(self) -> tuple[float, float]:
        top = self.base.support[1]
        return (-top, top)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        scalar = omega.ndim == 0
        omega = np.atleast_1d(omega)
        out = np.empty_like(omega)
        pos = omega > 0.0
        neg = omega < 0.0
        # -expm1(-x) = 1 - exp(-x), accurate for small positive arguments
        out[pos] = self.base(omega[pos]) / (-np.expm1(-self.beta * omega[pos]))
        # emission side via the Bose factor; exp underflows harmlessly to 0
        decay = np.exp(self.beta * omega[neg])
        out[neg] = self.base(-omega[neg]) * decay / (1.0 - decay)
        zero = ~(pos | neg)
        if np.any(zero):
            # removable singularity: J(omega)/(beta omega) as omega -> 0+
            h = 1e-8 * self.base.support[1]
            out[zero] = self.base(h) / (self.beta * h)
        return out[0] if scalar else out

    def describe(self) -> dict:
        return {"kind": "thermalized", "beta": self.beta, "base": self.base.describe()}

    def quad_panels(self):
        pos = self.base.quad_panels()
        if pos and pos[0][0] > 0.0:
            pos = [(0.0, pos[0][0])] + pos
        neg = [(-b, -a) for a, b in reversed(pos)]
        return neg + pos

    def quad_rule(self, budget):
        base = self.base
        if not isinstance(base, OhmicSD):
            nodes, w = _composite_grid(self.quad_panels(), budget)
            return nodes, np.clip(w * np.asarray(self(nodes), dtype=float), 0.0, None)
        # J_beta(omega) = omega^(s-1) * S(omega) on each side with S smooth, so
        # a Gauss-Jacobi rule with exponent s-1 per side is exact; the
        # emission side follows from detailed balance.
        m = max(int(budget) // 2, 20)
        s, wc = base.s, base.omega_c
        x, v = scipy.special.roots_jacobi(m, 0.0, s - 1.0)
        nodes = 0.5 * (x + 1.0) * wc
        smooth = np.asarray(self(nodes), dtype=float) * nodes ** (1.0 - s)
        mu_pos = (wc / 2.0) ** s * v * smooth
        mu_neg = mu_pos * np.exp(-self.beta * nodes)
        all_nodes = np.concatenate([-nodes[::-1], nodes])
        all_mu = np.concatenate([mu_neg[::-1], mu_pos])
        return all_nodes, np.clip(all_mu, 0.0, None)


def thermalized_sd(j: SpectralDensity, beta: float) -> ThermalizedSD:
    """Wrap a zero-temperature SD into its finite-temperature equivalent."""
    return ThermalizedSD(j, beta)


# ------------------------------------------------------------- coefficients


@dataclass(frozen=True)
class ChainCoefficients:
    """On-site energies, hoppings and system coupling of a mapped chain."""

    eps: np.ndarray
    t: np.ndarray
    c0: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if eps.ndim != 1 or t.ndim != 1 or t.size != max(eps.size - 1, 0):
            raise ValueError("need N on-site energies and N-1 hoppings")
        if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(t))):
            raise ValueError("chain coefficients must be finite")
        if np.any(t <= 0):
            raise ValueError("hoppings must be strictly positive")
        if not (self.c0 > 0 and math.isfinite(self.c0)):
            raise ValueError("system coupling c0 must be positive")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def n(self) -> int:
        return self.eps.size


def _lanczos_jacobi(
    nodes: np.ndarray, weights: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray, float]:
    """Jacobi recurrence coefficients of a discrete measure by Lanczos.

    Runs Lanczos on diag(nodes) starting from sqrt(weights), with two-pass
    reorthogonalization.  Returns (alphas[n], betas[n-1], mass).
    """
    mass = float(weights.sum())
    if mass <= 0.0:
        raise ValueError("measure has no weight")
    if nodes.size < n:
        raise ValueError(
            f"need at least {n} quadrature nodes for {n} coefficients, got {nodes.size}"
        )
    scale = max(np.abs(nodes).max(), 1e-300)
    q = np.sqrt(weights / mass)
    basis = [q]
    alphas = np.empty(n)
    betas = np.empty(max(n - 1, 0))
    for k in range(n):
        w = nodes * basis[k]
        alphas[k] = float(np.dot(basis[k], w))
        w = w - alphas[k] * basis[k]
        if k > 0:
            w = w - betas[k - 1] * basis[k - 1]
        for _ in range(2):
            for b in basis:
                w = w - np.dot(b, w) * b
        if k == n - 1:
            break
        norm = float(np.linalg.norm(w))
        if norm <= 1e-13 * scale:
            raise ValueError(
                f"recurrence unstable at index {k + 1}: residual norm {norm:.3e}; "
                "the measure cannot support this many orthogonal polynomials "
                "at working precision (reduce N or raise quad_points)"
            )
        betas[k] = norm
        basis.append(w / norm)
    return alphas, betas, mass


def chaincoeffs_from_sd(
    j: SpectralDensity, n: int, quad_points: int | None = None
) -> ChainCoefficients:
    """Chain coefficients of the polynomials orthonormal under weight J.

    ``quad_points`` is the target total number of quadrature nodes (default
    10 N, floor 4 N); it is distributed over the density's graded panels.
    Doubling it should leave every returned coefficient unchanged to ~1e-10
    relative; :func:`quadrature_convergence` measures that directly.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if quad_points is None:
        quad_points = 10 * n
    elif quad_points < 4 * n:
        raise ValueError(f"quad_points={quad_points} below the stability floor 4*N={4 * n}")
    nodes, weights = j.quad_rule(quad_points)
    alphas, betas, mass = _lanczos_jacobi(nodes, weights, n)
    return ChainCoefficients(
        eps=alphas,
        t=betas,
        c0=math.sqrt(mass),
        provenance={"sd": j.describe(), "n": n, "quad_points": int(nodes.size)},
    )


def chaincoeffs_ohmic_analytic(
    n: int, alpha: float, s: float, omega_c: float = 1.0
) -> ChainCoefficients:
    """Closed-form zero-temperature Ohmic chain coefficients.

    The weight (omega/omega_c)^s on [0, omega_c] is a shifted Jacobi weight,
    so the recurrence is known exactly:

        eps_k = (omega_c / 2) (1 + s^2 / ((s + 2k)(s + 2k + 2)))
        t_k   = omega_c (k+1)(k+1+s) / ((s+2k+2) sqrt((s+2k+2)^2 - 1))

    with the asymptotes eps -> omega_c/2 and t -> omega_c/4.  Only c0 depends
    on the coupling strength: c0 = omega_c sqrt(2 alpha / (1 + s)).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not s > -1:
        raise ValueError("ohmicity s must exceed -1")
    if not omega_c > 0:
        raise ValueError("omega_c must be positive")
    k = np.arange(n, dtype=float)
    eps = 0.5 * omega_c * (1.0 + s**2 / ((s + 2 * k) * (s + 2 * k + 2)))
    m = np.arange(1, n, dtype=float)
    t = omega_c * m * (m + s) / ((s + 2 * m) * np.sqrt((s + 2 * m) ** 2 - 1.0))
    c0 = omega_c * math.sqrt(2.0 * alpha / (s + 1.0))
    return ChainCoefficients(
        eps=eps,
        t=t,
        c0=c0,
        provenance={"sd": {"kind": "ohmic", "alpha": alpha, "s": s, "omega_c": omega_c},
                    "analytic": True},
    )


def _fermi_factor(x: np.ndarray, beta: float) -> np.ndarray:
    """Fermi function 1/(1 + exp(beta x)), stable for large |beta x|."""
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = np.exp(-beta * x[pos]) / (1.0 + np.exp(-beta * x[pos]))
    out[~pos] = 1.0 / (1.0 + np.exp(beta * x[~pos]))
    return out


def _as_callable(f, name: str) -> tuple[Callable, tuple[float, float] | None]:
    if callable(f):
        return f, None
    table = np.asarray(f, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ValueError(f"{name}: expected a callable or a (M, 2) table")
    grid, vals = table[:, 0], table[:, 1]
    if not np.all(np.diff(grid) > 0):
        raise ValueError(f"{name}: table grid must be strictly ascending")
    return (lambda k: np.interp(k, grid, vals)), (float(grid[0]), float(grid[-1]))


def chaincoeffs_fermionic(
    n: int,
    beta: float,
    lead: str,
    eps_of_k,
    v_of_k,
    band: tuple[float, float] | None = None,
    quad_points: int | None = None,
    chemical_potential: float = 0.0,
) -> ChainCoefficients:
    """Chain coefficients for one lead of a fermionic environment.

    The effective weight over the band is |V(k)|^2 f(eps(k)) with the Fermi
    occupation factor f for the filled lead and 1 - f for the empty one, both
    at inverse temperature beta and the given chemical potential.  The two
    weights sum pointwise to the bare hybridization |V|^2, so the pair of
    leads carries exactly the zero-temperature spectral weight.

    ``eps_of_k`` and ``v_of_k`` are callables on the band, or (M, 2) tables
    from which the band is inferred.  The Jacobi variable is the energy
    eps(k), so the returned on-site energies are physical mode energies.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError("beta must be positive and finite")
    if lead not in ("filled", "empty"):
        raise ValueError(f"lead must be 'filled' or 'empty', got {lead!r}")
    eps_fn, band_eps = _as_callable(eps_of_k, "eps_of_k")
    v_fn, band_v = _as_callable(v_of_k, "v_of_k")
    band = band or band_eps or band_v
    if band is None:
        raise ValueError("band=(k_min, k_max) is required with callable inputs")
    a, b = float(band[0]), float(band[1])
    if not b > a:
        raise ValueError("band must be a nondegenerate interval")
    if quad_points is None:
        quad_points = 10 * n
    elif quad_points < 4 * n:
        raise ValueError(f"quad_points={quad_points} below the stability floor 4*N={4 * n}")

    # panel breakpoints where the Fermi factor kinks (eps crosses mu)
    probe = np.linspace(a, b, 4097)
    de = np.asarray(eps_fn(probe), dtype=float) - chemical_potential
    crossings = []
    sign_change = np.where(np.sign(de[:-1]) * np.sign(de[1:]) < 0)[0]
    for i in sign_change:
        # linear interpolation of the crossing point
        k0, k1, f0, f1 = probe[i], probe[i + 1], de[i], de[i + 1]
        crossings.append(k0 - f0 * (k1 - k0) / (f1 - f0))
    cuts = [a] + sorted(crossings) + [b]
    panels: list[tuple[float, float]] = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        panels.extend(_graded_both(lo, hi))

    nodes_k, gauss_w = _composite_grid(panels, quad_points)
    energies = np.asarray(eps_fn(nodes_k), dtype=float)
    bare = gauss_w * np.asarray(v_fn(nodes_k), dtype=float) ** 2
    occ = _fermi_factor(energies - chemical_potential, beta)
    weights = bare * (occ if lead == "filled" else 1.0 - occ)
    weights = np.clip(weights, 0.0, None)
    if weights.sum() <= 1e-14 * max(bare.sum(), 1e-300):
        raise ValueError(
            f"the {lead} lead weight is empty: the Fermi factor removed all "
            "spectral mass on this band"
        )
    alphas, betas, mass = _lanczos_jacobi(energies, weights, n)
    return ChainCoefficients(
        eps=alphas,
        t=betas,
        c0=math.sqrt(mass),
        provenance={
            "kind": "fermionic",
            "lead": lead,
            "beta": beta,
            "chemical_potential": chemical_potential,
            "band": [a, b],
            "n": n,
            "quad_points": int(nodes_k.size),
        },
    )


def quadrature_convergence(
    j: SpectralDensity, n: int, quad_points: int | None = None
) -> float:
    """Max relative coefficient change when the quadrature budget doubles.

    Each change is measured against the larger of the coefficient itself and
    the overall coefficient scale, so that roundoff noise on a coefficient
    that happens to sit near zero (the on-site energies of a nearly symmetric
    weight, say) does not masquerade as non-convergence.
    """
    if quad_points is None:
        quad_points = 10 * n
    c1 = chaincoeffs_from_sd(j, n, quad_points)
    c2 = chaincoeffs_from_sd(j, n, 2 * quad_points)
    all1 = np.concatenate([c1.eps, c1.t, [c1.c0]])
    all2 = np.concatenate([c2.eps, c2.t, [c2.c0]])
    scale = np.maximum(np.abs(all2), np.abs(all2).max())
    return float(np.max(np.abs(all1 - all2) / scale))


# ------------------------------------------------------------- temperature


@dataclass(frozen=True)
class TemperatureSpec:
    """Inverse temperature, or the zero-temperature marker (beta = None)."""

    beta: float | None

    def __post_init__(self):
        if self.beta is not None and not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite (or None for zero-T)")

    @classmethod
    def zero(cls) -> "TemperatureSpec":
        return cls(beta=None)

    @classmethod
    def finite(cls, beta: float) -> "TemperatureSpec":
        return cls(beta=float(beta))

    @property
    def is_zero(self) -> bool:
        return self.beta is None


def find_chain_length(t_final: float, omega_c: float, temp: TemperatureSpec) -> int:
    """Rule-of-thumb chain length from the propagation speed of excitations.

    Excitations injected at the system end travel ballistically, so the chain
    only needs to be long enough that nothing reflects off the far end within
    the simulated time: N ~ omega_c t / 4 at zero temperature and twice that
    on the doubled (thermalized) support.
    """
    if not (t_final > 0 and omega_c > 0):
        raise ValueError("t_final and omega_c must be positive")
    factor = 4.0 if temp.is_zero else 2.0
    return max(1, math.ceil(round(omega_c * t_final / factor, 9)))


class ChainLengthCheck(NamedTuple):
    passed: bool
    first_violation_time: float | None


def verify_chain_length(results, threshold: float) -> ChainLengthCheck:
    """Check that the terminal chain site stayed essentially unpopulated.

    ``results`` must carry an 'occ' series (chain occupations, one column per
    chain site); the last column is compared against the threshold and the
    first crossing time is reported on failure.
    """
    series = getattr(results, "series", {})
    if "occ" not in series:
        raise ValueError(
            "verify_chain_length needs the terminal-occupation observable: "
            "no 'occ' series in the results"
        )
    occ = np.atleast_2d(np.real(series["occ"]))
    terminal = occ[:, -1]
    above = np.where(terminal > threshold)[0]
    if above.size == 0:
        return ChainLengthCheck(True, None)
    return ChainLengthCheck(False, float(np.asarray(results.times)[above[0]]))


# ------------------------------------------------------------------- basis


@dataclass(frozen=True)
class OrthonormalPolyBasis:
    """Polynomials orthonormal under a spectral density, via their recurrence.

    ``coeffs`` supplies the Jacobi recurrence (eps diagonal, t subdiagonal)
    and the total mass c0^2; a basis built from N-site chain coefficients can
    evaluate P_0 .. P_{N-1}.
    """

    sd: SpectralDensity
    coeffs: ChainCoefficients

    @property
    def size(self) -> int:
        return self.coeffs.n

    def evaluate(self, n: int, omegas) -> np.ndarray:
        """Array of shape (n, len(omegas)) with rows P_0(omega) .. P_{n-1}."""
        if not 1 <= n <= self.size:
            raise ValueError(f"can evaluate 1..{self.size} polynomials, asked for {n}")
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        eps, t, c0 = self.coeffs.eps, self.coeffs.t, self.coeffs.c0
        out = np.empty((n, omegas.size))
        out[0] = 1.0 / c0
        if n > 1:
            out[1] = (omegas - eps[0]) * out[0] / t[0]
        for k in range(1, n - 1):
            out[k + 1] = ((omegas - eps[k]) * out[k] - t[k - 1] * out[k - 1]) / t[k]
        return out

    def coupling_functions(self, n: int, omegas) -> np.ndarray:
        """U_n(omega) = sqrt(J(omega)) P_n(omega), the mode-to-chain kernel."""
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        root_j = np.sqrt(np.clip(np.asarray(self.sd(omegas), dtype=float), 0.0, None))
        return self.evaluate(n, omegas) * root_j[np.newaxis, :]

    def orthonormality_residual(self, n: int | None = None, quad_points: int | None = None) -> float:
        """max |int P_a P_b J - delta_ab| over a, b < n, by quadrature."""
        n = self.size if n is None else n
        nodes, w = self.sd.quad_rule(quad_points or 10 * self.size)
        p = self.evaluate(n, nodes)
        gram = (p * w[np.newaxis, :]) @ p.T
        return float(np.abs(gram - np.eye(n)).max())


def basis_from_sd(
    sd: SpectralDensity, n: int, quad_points: int | None = None
) -> OrthonormalPolyBasis:
    return OrthonormalPolyBasis(sd, chaincoeffs_from_sd(sd, n, quad_points))


def chain_to_mode_transform(
    basis: OrthonormalPolyBasis,
    chain_data,
    omega_grid,
    connected_singles=None,
) -> np.ndarray:
    """Rotate chain-site observables into frequency-resolved mode observables.

    For a matrix of two-operator chain expectations M[n, m] (for example
    <b_n^dag b_m>, or the anomalous <b_n^dag b_m^dag>) the mode-resolved
    surface is sum_nm U_n(omega) M[n, m] U_m(omega'); a vector of one-operator
    expectations transforms to sum_n U_n(omega) v[n].  Passing
    ``connected_singles=(v1, v2)`` subtracts the product of the transformed
    single-operator expectations, yielding the connected correlation.
    """
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    lo, hi = basis.sd.support
    span = hi - lo
    if omega_grid.min() < lo - 1e-12 * span or omega_grid.max() > hi + 1e-12 * span:
        raise ValueError(
            f"omega grid [{omega_grid.min()}, {omega_grid.max()}] leaves the "
            f"spectral density support [{lo}, {hi}]"
        )
    data = np.asarray(chain_data)
    u = basis.coupling_functions(data.shape[0], omega_grid)  # (n, G)
    if data.ndim == 1:
        return u.T @ data
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ValueError("chain_data must be a vector or a square matrix over chain sites")
    out = u.T @ data @ u
    if connected_singles is not None:
        v1, v2 = connected_singles
        u1 = basis.coupling_functions(len(v1), omega_grid).T @ np.asarray(v1)
        u2 = basis.coupling_functions(len(v2), omega_grid).T @ np.asarray(v2)
        out = out - np.outer(u1, u2)
    return out


def reorganization_energy(sd: SpectralDensity, quad_points: int = 2000) -> float:
    """int J(omega)/omega d(omega) over the positive part of the support."""
    if isinstance(sd, OhmicSD):
        return 2.0 * sd.alpha * sd.omega_c / sd.s  # elementary integral
    nodes, w = sd.quad_rule(quad_points)
    keep = nodes > 0
    return float(np.sum(w[keep] / nodes[keep]))


# --------------------------------------------------------------------- I/O


def load_spectral_density(path) -> SpectralDensity:
    """Read an SD description: key = value text for parametrized kinds, or
    plain two-column numeric text (omega, J) for a tabulated density."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty spectral density file")
    if "=" not in lines[0]:
        rows = [tuple(float(x) for x in ln.split()) for ln in lines]
        if any(len(r) != 2 for r in rows):
            raise ValueError(f"{path}: tabulated SD rows must have two columns")
        arr = np.array(rows)
        return TabulatedSD(arr[:, 0], arr[:, 1])
    fields_in: dict[str, str] = {}
    for ln in lines:
        if "=" not in ln:
            raise ValueError(f"{path}: malformed line {ln!r}")
        key, _, value = ln.partition("=")
        fields_in[key.strip().lower()] = value.strip()
    kind = fields_in.pop("kind", "ohmic").lower()
    if kind != "ohmic":
        raise ValueError(f"{path}: unknown SD kind {kind!r} (expected 'ohmic' or a table)")
    try:
        alpha = float(fields_in.pop("alpha"))
        s = float(fields_in.pop("s"))
        omega_c = float(fields_in.pop("omega_c", 1.0))
    except KeyError as missing:
        raise ValueError(f"{path}: missing ohmic SD field {missing}") from None
    if fields_in:
        raise ValueError(f"{path}: unknown SD fields {sorted(fields_in)}")
    return OhmicSD(alpha=alpha, s=s, omega_c=omega_c)


def write_chain_coefficients(path, coeffs: ChainCoefficients) -> None:
    """Three numeric columns (n, eps_n, t_n) under a provenance header.

    The hopping column of the final row pads with zero; c0 lives in the
    header.  Numbers round-trip exactly through :func:`read_chain_coefficients`.
    """
    with open(path, "w") as fh:
        fh.write(
            f"# c0= {coeffs.c0:.17g} provenance= {json.dumps(coeffs.provenance, sort_keys=True)}\n"
        )
        for i in range(coeffs.n):
            t_i = coeffs.t[i] if i < coeffs.n - 1 else 0.0
            fh.write(f"{i} {coeffs.eps[i]:.17g} {t_i:.17g}\n")


def read_chain_coefficients(path) -> ChainCoefficients:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# c0="):
            raise ValueError(f"{path}: missing chain-coefficient header")
        rest = header[len("# c0=") :].strip()
        c0_text, _, prov_text = rest.partition("provenance=")
        provenance = json.loads(prov_text.strip()) if prov_text.strip() else {}
        rows = [ln.split() for ln in fh if ln.strip()]
    if not rows:
        raise ValueError(f"{path}: no coefficient rows")
    eps = np.array([float(r[1]) for r in rows])
    t = np.array([float(r[2]) for r in rows[:-1]])
    return ChainCoefficients(eps=eps, t=t, c0=float(c0_text), provenance=provenance)
