"""Plaintext closed-loop simulation and structural-consensus verification.

This is the reference the encrypted protocol is checked against.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .spectral import _gamma_pair
from .topology import Topology, WeightSchedule, laplacian, laplacian_stack, sample_weights


@dataclass(frozen=True)
class FirstOrderState:
    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("state has non-finite entries")
        object.__setattr__(self, "x", x)

    def vector(self) -> np.ndarray:
        return self.x


@dataclass(frozen=True)
class SecondOrderState:
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if p.shape != v.shape:
            raise ValueError("position and velocity must have the same length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("state has non-finite entries")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v])


State = Union[FirstOrderState, SecondOrderState]


@dataclass(frozen=True)
class Trajectory:
    """``states[k]`` is x[k] (first order) or [p[k]; v[k]] (second order)."""

    states: np.ndarray
    order: str
    schedule: WeightSchedule | None
    gains: object
    leader: int = 0

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n_agents(self) -> int:
        n = self.states.shape[1]
        return n if self.order == "first" else n // 2

    def state(self, k: int) -> State:
        row = self.states[k]
        if self.order == "first":
            return FirstOrderState(row)
        n = self.n_agents
        return SecondOrderState(row[:n], row[n:])


@dataclass(frozen=True)
class ConsensusReport:
    passed: bool
    deviation: float
    rate: float
    deviations: np.ndarray = field(repr=False)


def step_first(topology: Topology, state: FirstOrderState, weights: np.ndarray, epsilon: float) -> FirstOrderState:
    """x' = (I - eps L) x."""
    L = laplacian(topology, weights)
    return FirstOrderState(state.x - epsilon * (L @ state.x))


def step_second(
    topology: Topology, state: SecondOrderState, weights: np.ndarray, gamma1: float, gamma2: float
) -> SecondOrderState:
    """p' = p + v, v' = v + u with u = -(g1 L p + g2 L v)."""
    L = laplacian(topology, weights)
    u = -(gamma1 * (L @ state.p) + gamma2 * (L @ state.v))
    return SecondOrderState(state.p + state.v, state.v + u)


def _order_of(initial: State) -> str:
    return "first" if isinstance(initial, FirstOrderState) else "second"


def simulate(
    topology: Topology,
    initial: State,
    gains,
    horizon: int,
    seed: int | None = None,
    schedule: WeightSchedule | None = None,
) -> Trajectory:
    """Run the closed loop for ``horizon`` steps.

    A fresh schedule is sampled from ``seed`` unless one is given.  ``gains`` is
    epsilon for first order, or (gamma1, gamma2) / SecondOrderGains for second.
    """
    order = _order_of(initial)
    x0 = initial.vector()
    if horizon == 0:
        return Trajectory(x0[None, :].copy(), order, schedule, gains, topology.leader)
    if schedule is None:
        schedule = sample_weights(topology, horizon, seed)
    if schedule.horizon < horizon:
        raise ValueError("schedule is shorter than the horizon")
    Ls = laplacian_stack(topology, schedule.weights[:horizon])
    n = topology.n_agents
    states = np.empty((horizon + 1, x0.size))
    states[0] = x0
    if order == "first":
        eps = float(gains)
        for k in range(horizon):
            x = states[k]
            states[k + 1] = x - eps * (Ls[k] @ x)
    else:
        g1, g2 = _gamma_pair(gains)
        for k in range(horizon):
            p, v = states[k, :n], states[k, n:]
            u = -(g1 * (Ls[k] @ p) + g2 * (Ls[k] @ v))
            states[k + 1, :n] = p + v
            states[k + 1, n:] = v + u
    return Trajectory(states, order, schedule, gains, topology.leader)


def consensus_target(topology: Topology, initial: State, k: int):
    """sigma[k]: the leader's x[0], or (p_L[0] + k v_L[0], v_L[0])."""
    ld = topology.leader
    if isinstance(initial, FirstOrderState):
        return float(initial.x[ld])
    return (float(initial.p[ld] + k * initial.v[ld]), float(initial.v[ld]))


def deviation_sequence(trajectory: Trajectory) -> np.ndarray:
    """||x[k] - sigma[k] (x) 1||_inf for every k."""
    S = trajectory.states
    ld = trajectory.leader
    K = S.shape[0]
    if trajectory.order == "first":
        return np.abs(S - S[0, ld]).max(axis=1)
    n = trajectory.n_agents
    ks = np.arange(K)
    p_target = S[0, ld] + ks * S[0, n + ld]
    v_target = np.full(K, S[0, n + ld])
    dp = np.abs(S[:, :n] - p_target[:, None]).max(axis=1)
    dv = np.abs(S[:, n:] - v_target[:, None]).max(axis=1)
    return np.maximum(dp, dv)


def _geometric_rate(dev: np.ndarray) -> float:
    """Per-step decay factor of a log-linear fit over the positive tail."""
    tail = dev[len(dev) // 2 :]
    k = np.arange(len(dev))[len(dev) // 2 :]
    mask = tail > 1e-300
    if mask.sum() < 2:
        return 0.0
    slope = np.polyfit(k[mask], np.log(tail[mask]), 1)[0]
    return float(np.exp(slope))


def structural_consensus_check(trajectory: Trajectory, tol: float = 1e-6) -> ConsensusReport:
    """Final deviation below ``tol`` with a decaying deviation envelope."""
    if trajectory.states.shape[0] < 2:
        raise ValueError("trajectory needs at least two states")
    dev = deviation_sequence(trajectory)
    final = float(dev[-1])
    if not np.isfinite(final):
        return ConsensusReport(False, float("inf"), float("inf"), dev)
    half = len(dev) // 2
    decaying = final == 0.0 or final < dev[: max(half, 1)].max()
    rate = _geometric_rate(dev)
    return ConsensusReport(bool(final < tol and decaying), final, rate, dev)
