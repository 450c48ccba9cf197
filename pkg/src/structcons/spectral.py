"""Spectra of time-varying Laplacians and constructive consensus gains.

First order: the step size bound from row norms of A[0] plus the Gershgorin
check.  Second order: a Monte-Carlo spectral box for the nonzero Laplacian
eigenvalues, then (varrho, kappa, rho) and the gains gamma1 < gamma2 built
from it, the closed boundary curve, and the three eigenvalue conditions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .eigen import eigenvalues, eigenvalues_batch
from .errors import (
    EigsFailed,
    EmptyInterval,
    Infeasible,
    NoConvergence,
    NoRootAboveOne,
    NoSpanningTree,
)
from .topology import Topology, has_spanning_tree, laplacian_stack

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class SpectralBox:
    """Polar box [r_min, r_max] x [-theta_max, theta_max] holding every nonzero eigenvalue."""

    theta_max: float
    r_min: float
    r_max: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_max < HALF_PI:
            raise ValueError(f"theta_max={self.theta_max} outside (0, pi/2)")
        if not 0.0 < self.r_min <= self.r_max:
            raise ValueError(f"need 0 < r_min <= r_max, got {self.r_min}, {self.r_max}")

    def contains(self, mu: complex) -> bool:
        r = abs(mu)
        return self.r_min <= r <= self.r_max and abs(np.angle(mu)) <= self.theta_max


@dataclass(frozen=True)
class SecondOrderGains:
    gamma1: float
    gamma2: float
    rho: float
    kappa: float
    varrho: float
    theta_rho: float
    box: SpectralBox | None = None

    def __post_init__(self) -> None:
        if not self.gamma2 > self.gamma1 > 0:
            raise ValueError("need gamma2 > gamma1 > 0")

    @classmethod
    def from_gammas(cls, gamma1: float, gamma2: float) -> "SecondOrderGains":
        """Wrap hand-picked gains; the construction parameters are left as NaN."""
        nan = float("nan")
        return cls(gamma1, gamma2, gamma2 / gamma1, nan, nan, nan)


@dataclass(frozen=True)
class IterationMatrix:
    entries: np.ndarray
    order: str
    leader: int = 0

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0] if self.order == "first" else self.entries.shape[0] // 2


@dataclass(frozen=True)
class BoundaryPoint:
    theta: float
    radius: float
    branch: str  # "plus" or "minus"

    @property
    def z(self) -> complex:
        return self.radius * complex(math.cos(self.theta), math.sin(self.theta))


# ---------------------------------------------------------------- first order


def epsilon_bound(topology: Topology) -> float:
    """Strict upper bound 1 / max_i(||alpha_i||_1 + delta * ||alpha_i||_0) on epsilon."""
    A0 = topology.base_adjacency()
    row = A0.sum(axis=1) + topology.delta * np.count_nonzero(A0, axis=1)
    return 1.0 / float(row.max())


def gershgorin_check(L: np.ndarray, epsilon: float) -> bool:
    """|epsilon * l_ii| < 1 on every row."""
    return bool(np.all(np.abs(epsilon * np.diag(L)) < 1.0))


def gershgorin_discs(L: np.ndarray, epsilon: float) -> list[tuple[float, float]]:
    """(center, radius) of each disc of epsilon * L; both equal epsilon * l_ii."""
    L = np.asarray(L)
    radii = np.abs(L).sum(axis=1) - np.abs(np.diag(L))
    return [(epsilon * c, epsilon * r) for c, r in zip(np.diag(L), radii)]


# ----------------------------------------------------------------- spectra


def _followers(n: int, leader: int) -> np.ndarray:
    return np.array([i for i in range(n) if i != leader], dtype=int)


def nonzero_eigenvalues(L: np.ndarray, leader: int = 0) -> np.ndarray:
    """Laplacian spectrum without the structural zero.

    The leader row of L vanishes, so deflating against w = e_leader leaves the
    follower block, whose eigenvalues are the N - 1 nonzero ones.
    """
    idx = _followers(L.shape[0], leader)
    return eigenvalues(np.asarray(L)[np.ix_(idx, idx)])


def sampled_nonzero_eigenvalues(topology: Topology, n_samples: int, seed: int | None) -> np.ndarray:
    """``(n_samples, N-1)`` nonzero eigenvalues over independent admissible weight draws."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(topology.base_weights) - topology.delta
    hi = np.asarray(topology.base_weights) + topology.delta
    W = rng.uniform(lo, hi, size=(n_samples, topology.n_edges))
    L = laplacian_stack(topology, W)
    idx = _followers(topology.n_agents, topology.leader)
    return eigenvalues_batch(L[:, idx][:, :, idx])


def estimate_spectral_box(
    topology: Topology,
    n_samples: int = 2000,
    seed: int | None = 0,
    margin: float = 0.1,
) -> SpectralBox:
    """Monte-Carlo spectral box, widened by ``margin``.

    Radii shrink/grow by the relative margin.  The angle grows by ``margin``
    times its headroom to pi/2, so an all-real spectrum still gets a strictly
    positive theta_max.
    """
    if not has_spanning_tree(topology):
        raise NoSpanningTree("spectral box needs a spanning tree")
    mus = sampled_nonzero_eigenvalues(topology, n_samples, seed).ravel()
    return _box_from_samples(mus, margin)


def _box_from_samples(mus: np.ndarray, margin: float) -> SpectralBox:
    if np.any(mus.real <= 0):
        raise Infeasible("sampled Laplacian eigenvalue with non-positive real part")
    theta = float(np.abs(np.angle(mus)).max())
    r = np.abs(mus)
    return SpectralBox(
        theta_max=theta + margin * (HALF_PI - theta),
        r_min=float(r.min()) * (1.0 - margin),
        r_max=float(r.max()) * (1.0 + margin),
    )


# ----------------------------------------------------------- second order gains


def rho_residual(rho: float, varrho: float, theta: float) -> float:
    return (2 * rho - 1) / (rho - 1) ** 2 - varrho / math.tan(theta)


def solve_rho(varrho: float, theta_max: float) -> float:
    """Root rho > 1 of (2 rho - 1) / (rho - 1)^2 = varrho * cot(theta_max).

    With c = varrho * cot(theta_max) this is c rho^2 - (2c + 2) rho + (c + 1) = 0,
    whose roots are ((c + 1) +- sqrt(c + 1)) / c; only the plus root exceeds 1.
    """
    if not 0.0 < theta_max < HALF_PI:
        raise ValueError("theta_max must lie in (0, pi/2)")
    c = varrho / math.tan(theta_max)
    if not c > 0:
        raise NoRootAboveOne(f"c = varrho*cot(theta_max) = {c} must be positive")
    # 1 + (1 + sqrt(c+1)) / c avoids cancellation when c is large
    return 1.0 + (1.0 + math.sqrt(c + 1.0)) / c


def kappa_interval(varrho: float, box: SpectralBox) -> tuple[float, float]:
    """Open interval of admissible kappa for a given varrho."""
    s = math.sqrt(1.0 - varrho)
    low = (1.0 - s) / box.r_min
    high = (1.0 + s) / box.r_max * math.cos(box.theta_max)
    if not low < high:
        raise EmptyInterval(f"kappa interval ({low}, {high}) is empty for varrho={varrho}")
    return low, high


def _feasible(varrho: float, box: SpectralBox) -> bool:
    try:
        kappa_interval(varrho, box)
    except EmptyInterval:
        return False
    return True


def largest_feasible_varrho(box: SpectralBox, iters: int = 80) -> float:
    """Bisection for the supremum of varrho in (0, 1) with a nonempty kappa interval."""
    lo, hi = 0.0, 1.0
    if _feasible(hi, box):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _feasible(mid, box):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise Infeasible("no varrho in (0, 1) gives a nonempty kappa interval")
    return lo


def rho_angle(theta_max: float) -> float:
    """Angle fed to :func:`solve_rho`.

    The containment argument needs tan(theta)^2 <= tan(angle) for every
    |theta| <= theta_max.  Below pi/4 theta_max itself works; above it the
    angle is raised to atan(tan(theta_max)^2).
    """
    if theta_max <= 0.25 * math.pi:
        return theta_max
    return math.atan(math.tan(theta_max) ** 2)


def gains_from_box(box: SpectralBox) -> SecondOrderGains:
    varrho = 0.5 * largest_feasible_varrho(box)
    low, high = kappa_interval(varrho, box)
    kappa = 0.5 * (low + high)
    theta = rho_angle(box.theta_max)
    rho = solve_rho(varrho, theta)
    gamma1 = 2.0 * kappa / (2.0 * rho - 1.0)
    return SecondOrderGains(gamma1, rho * gamma1, rho, kappa, varrho, theta, box)


def select_gamma(
    topology: Topology,
    seed: int | None = 0,
    n_samples: int = 2000,
    margin: float = 0.1,
) -> SecondOrderGains:
    """Second-order gains for structural consensus on ``topology``.

    Raises:
        NoSpanningTree: the topology has no spanning tree from the leader.
        Infeasible: no varrho works, or the resulting gains miss a condition on
            one of the sampled eigenvalues.
    """
    if not has_spanning_tree(topology):
        raise NoSpanningTree("gain selection needs a spanning tree")
    mus = sampled_nonzero_eigenvalues(topology, n_samples, seed).ravel()
    box = _box_from_samples(mus, margin)
    gains = gains_from_box(box)
    if not gamma_conditions_hold(mus, gains.gamma1, gains.gamma2):
        raise Infeasible("selected gains violate the eigenvalue conditions on a sample")
    return gains


# ------------------------------------------------------- boundary & conditions


def boundary_discriminant(theta: float, rho: float) -> float:
    return math.cos(theta) ** 2 - (2 * rho - 1) * math.sin(theta) ** 2 / (rho - 1) ** 2


def boundary_radii(theta: float, gamma1: float, rho: float) -> tuple[float, float] | None:
    """(minus, plus) branch radii at angle ``theta``; None where the discriminant < 0."""
    disc = boundary_discriminant(theta, rho)
    if disc < 0:
        return None
    root = math.sqrt(disc)
    den = gamma1 * (2 * rho - 1)
    c = math.cos(theta)
    return 2 * (c - root) / den, 2 * (c + root) / den


def boundary_angle_limit(rho: float) -> float:
    """Angle where both branches meet: tan^2(theta) = (rho - 1)^2 / (2 rho - 1)."""
    return math.atan((rho - 1) / math.sqrt(2 * rho - 1))


def boundary_curve(gamma1: float, rho: float, n_theta_samples: int = 361) -> list[BoundaryPoint]:
    """Both branches of the closed boundary sampled over (-pi/2, pi/2).

    Angles with a negative discriminant are dropped; the two meeting points
    are added so the curve closes.
    """
    if not gamma1 > 0 or not rho > 1:
        raise ValueError("need gamma1 > 0 and rho > 1")
    limit = boundary_angle_limit(rho)
    thetas = np.concatenate([np.linspace(-HALF_PI, HALF_PI, n_theta_samples), [-limit, limit]])
    thetas = np.unique(thetas)
    points: list[BoundaryPoint] = []
    for th in thetas:
        radii = boundary_radii(float(th), gamma1, rho)
        if radii is None:
            # the meeting angle may round to a tiny negative discriminant
            if abs(abs(th) - limit) > 1e-12:
                continue
            r = 2 * math.cos(th) / (gamma1 * (2 * rho - 1))
            radii = (r, r)
        points.append(BoundaryPoint(float(th), radii[1], "plus"))
        points.append(BoundaryPoint(float(th), radii[0], "minus"))
    return points


def gamma_condition_values(mu: complex, gamma1: float, gamma2: float) -> tuple[float, float]:
    """Slack of the quadratic and real-part conditions; both must be negative.

    Returns:
        ``(q, p)`` with
        q = (2 g2 - g1)|mu|^2 - 4 Re(mu) + 4 g1 Im(mu)^2 / ((g2 - g1)^2 |mu|^2)
        p = -4 Re(mu) / |mu|^2 - (g1 - 2 g2)
    """
    r2 = abs(mu) ** 2
    diff = gamma2 - gamma1
    if diff == 0:
        quad = math.inf if mu.imag != 0 else (2 * gamma2 - gamma1) * r2 - 4 * mu.real
    else:
        quad = (2 * gamma2 - gamma1) * r2 - 4 * mu.real + 4 * gamma1 * mu.imag**2 / (diff**2 * r2)
    real_part = -4 * mu.real / r2 - (gamma1 - 2 * gamma2)
    return float(quad), float(real_part)


def gamma_conditions_hold(mus: Iterable[complex], gamma1: float, gamma2: float) -> bool:
    if not gamma2 > gamma1 > 0:
        return False
    for mu in mus:
        quad, real_part = gamma_condition_values(complex(mu), gamma1, gamma2)
        if not (quad < 0 and real_part < 0):
            return False
    return True


def check_gamma_conditions(L: np.ndarray, gamma1: float, gamma2: float, leader: int = 0) -> bool:
    """All three conditions hold strictly for every nonzero eigenvalue of ``L``."""
    return gamma_conditions_hold(nonzero_eigenvalues(L, leader), gamma1, gamma2)


def boundary_margin(mus: Sequence[complex] | np.ndarray, gamma1: float, gamma2: float) -> float:
    """min over mu of -q(mu); positive iff every eigenvalue sits strictly inside the curve."""
    return min(-gamma_condition_values(complex(mu), gamma1, gamma2)[0] for mu in np.ravel(mus))


# ----------------------------------------------------------- iteration matrix


def iteration_matrix(L: np.ndarray, gains, leader: int = 0) -> IterationMatrix:
    """F = I - eps L, or the block form [[I, I], [-g1 L, I - g2 L]].

    ``gains`` is a float step size for first order, or anything with
    ``gamma1``/``gamma2`` attributes (or a ``(gamma1, gamma2)`` pair) for second order.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    eye = np.eye(n)
    if np.isscalar(gains):
        return IterationMatrix(eye - float(gains) * L, "first", leader)
    g1, g2 = _gamma_pair(gains)
    F = np.block([[eye, eye], [-g1 * L, eye - g2 * L]])
    return IterationMatrix(F, "second", leader)


def _gamma_pair(gains) -> tuple[float, float]:
    if hasattr(gains, "gamma1"):
        return float(gains.gamma1), float(gains.gamma2)
    g1, g2 = gains
    return float(g1), float(g2)


def deflated(F: IterationMatrix) -> np.ndarray:
    """F with its structural unit eigenvalue(s) removed.

    The leader rows of F are e_leader^T (first order) and the pair
    (e_leader, e_leader), (0, e_leader) (second order), so projecting along the
    known left eigenvectors leaves the follower block.
    """
    n = F.n_agents
    idx = _followers(n, F.leader)
    if F.order == "second":
        idx = np.concatenate([idx, idx + n])
    return F.entries[np.ix_(idx, idx)]


def spectral_radius_excess(F: IterationMatrix, method: str = "qr") -> float:
    """Largest |lambda| of F besides the structural unit eigenvalue(s); 0 if none."""
    block = deflated(F)
    if block.size == 0:
        return 0.0
    try:
        vals = eigenvalues(block) if method == "qr" else np.linalg.eigvals(block)
    except (NoConvergence, np.linalg.LinAlgError) as exc:
        raise EigsFailed(str(exc)) from exc
    return float(np.abs(vals).max())
