"""Threat models: passive eavesdropper and honest-but-curious neighbor.

Privacy is operationalized as non-identifiability: the attacker's collected
equations admit several distinct assignments of the victim's states and the
weights, all consistent with the public structural interval.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleWitness, NotNeighbors
from .paillier import Ciphertext, PaillierPrivateKey, PaillierPublicKey, decrypt, keygen
from .protocol import AgentNode, Phase, Transcript, WireMessage
from .spectral import _gamma_pair
from .topology import Topology


@dataclass(frozen=True)
class AdversaryView:
    """Everything one adversary legitimately observes.

    ``kind`` is ``"malicious"`` (attacker decrypts messages from the victim),
    ``"receiver"`` (attacker only relays the victim's ciphertexts), or
    ``"eavesdropper"``.
    """

    kind: str
    order: str
    attacker: int | None = None
    victim: int | None = None
    k_c: int = -1
    own_states: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    messages: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gains: object = None
    base_weight: float = float("nan")
    delta: float = float("nan")
    ciphertexts: tuple[WireMessage, ...] = ()
    public_keys: dict[int, PaillierPublicKey] = field(default_factory=dict)
    # weights the attacker itself assigns to the victim (the attacker is the sender on that edge)
    own_weights_to_victim: np.ndarray | None = None
    victim_in_neighbors: tuple[int, ...] = ()

    @property
    def n_equations(self) -> int:
        return len(self.messages) if self.kind == "malicious" else 0

    def interval(self) -> tuple[float, float]:
        return self.base_weight - self.delta, self.base_weight + self.delta


class EquationCount(NamedTuple):
    equations: int
    unknowns: int
    deficiency: int


@dataclass(frozen=True)
class Hypothesis:
    weights: np.ndarray
    victim_states: np.ndarray  # (k_c+1,) first order, (k_c+1, 2) second order as (p, v)


@dataclass(frozen=True)
class AttackResult:
    status: str  # "recovered", "relation", "not_applicable"
    reason: str = ""
    T: int | None = None
    beta: float | None = None
    weight: float | None = None
    victim_states: np.ndarray | None = None

    @property
    def applicable(self) -> bool:
        return self.status != "not_applicable"


@dataclass(frozen=True)
class EavesdropperReport:
    n_messages: int
    n_ciphertexts: int
    distinct_ciphertexts: int
    collisions: int
    residue_mean: float | None
    residue_std: float | None
    wrong_key_correlation: float | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------- views


def build_malicious_view(
    transcript: Transcript,
    topology: Topology,
    attacker: int,
    victim: int,
    k_c: int,
    gains=None,
    attacker_node: AgentNode | None = None,
    own_weights: np.ndarray | None = None,
) -> AdversaryView:
    """Restrict a run to what ``attacker`` sees about ``victim`` over steps 0..k_c.

    The weights the attacker itself assigns to the victim come from
    ``attacker_node`` (encrypted runs) or ``own_weights`` (plaintext transcripts).

    Raises:
        ValueError: attacker and victim coincide.
        NotNeighbors: no edge between them in either direction.
    """
    if attacker == victim:
        raise ValueError("attacker and victim must differ")
    edges = set(topology.edges)
    reads_victim = (victim, attacker) in edges
    read_by_victim = (attacker, victim) in edges
    if not (reads_victim or read_by_victim):
        raise NotNeighbors(f"agents {attacker} and {victim} do not exchange messages")
    seen = tuple(m for m in transcript.messages if m.step <= k_c and attacker in (m.sender, m.receiver))
    own_w = None
    if read_by_victim:
        if attacker_node is not None:
            own_w = np.array(attacker_node.weight_log.get(victim, [])[: k_c + 1])
        elif own_weights is not None:
            own_w = np.asarray(own_weights, dtype=float)[: k_c + 1]
    common = dict(
        order=transcript.order,
        attacker=attacker,
        victim=victim,
        k_c=k_c,
        own_states=transcript.own_states(attacker)[: k_c + 1],
        gains=gains,
        delta=topology.delta,
        ciphertexts=seen,
        public_keys=dict(transcript.public_keys),
        own_weights_to_victim=own_w,
        victim_in_neighbors=tuple(topology.in_neighbors(victim)),
    )
    if not reads_victim:
        return AdversaryView(kind="receiver", **common)
    u = transcript.u_series(attacker, victim)[: k_c + 1]
    if len(u) < k_c + 1:
        raise ValueError(f"transcript holds only {len(u)} steps, need {k_c + 1}")
    return AdversaryView(
        kind="malicious",
        messages=u,
        base_weight=topology.base_weights[topology.edge_index(victim, attacker)],
        **common,
    )


def build_eavesdropper_view(transcript: Transcript) -> AdversaryView:
    return AdversaryView(
        kind="eavesdropper",
        order=transcript.order,
        ciphertexts=tuple(transcript.messages),
        public_keys=dict(transcript.public_keys),
    )


def underdetermination_report(view: AdversaryView) -> EquationCount:
    """One equation per step against 2 (first order) or 3 (second order) unknowns per step."""
    if view.kind != "malicious":
        raise ValueError("counts are defined for a malicious-neighbor view")
    steps = len(view.messages)
    per_step = 2 if view.order == "first" else 3
    return EquationCount(steps, per_step * steps, (per_step - 1) * steps)



def multi_victim_report(transcript: Transcript, topology: Topology, attacker: int, k_c: int) -> EquationCount:
    """Pooled counts when the attacker combines the equations of every neighbor it reads.

    Victims do not share unknowns, so the deficiencies simply add up; no claim is
    made about cross-victim identifiability beyond this count.
    """
    total = EquationCount(0, 0, 0)
    for victim in topology.in_neighbors(attacker):
        if victim == topology.leader:
            continue
        view = build_malicious_view(transcript, topology, attacker, victim, k_c)
        c = underdetermination_report(view)
        total = EquationCount(*(a + b for a, b in zip(total, c)))
    return total

# ---------------------------------------------------------------- hypotheses


def admissible_scale_range(reference: np.ndarray, lo: float, hi: float, iters: int = 100) -> tuple[float, float]:
    """Largest [c_lo, c_hi] around 1 with ``c * reference`` inside [lo, hi], by bisection."""
    reference = np.asarray(reference, dtype=float)

    def ok(c: float) -> bool:
        w = c * reference
        return bool(np.all(w >= lo) and np.all(w <= hi))

    if not ok(1.0):
        raise InfeasibleWitness("reference weights leave the structural interval")
    bounds = []
    for far in (lo / reference.max(), hi / reference.min()):
        inside, outside = 1.0, far
        if ok(far):
            bounds.append(far)
            continue
        for _ in range(iters):
            mid = 0.5 * (inside + outside)
            if ok(mid):
                inside = mid
            else:
                outside = mid
        bounds.append(inside)
    return bounds[0], bounds[1]


def equation_residuals(view: AdversaryView, hyp: Hypothesis) -> np.ndarray:
    """|a (x_B - x_A) - u| per step (second order: the gamma-weighted form)."""
    a = hyp.weights
    if view.order == "first":
        return np.abs(a * (hyp.victim_states - view.own_states[:, 0]) - view.messages)
    g1, g2 = _gamma_pair(view.gains)
    pb, vb = hyp.victim_states[:, 0], hyp.victim_states[:, 1]
    pa, va = view.own_states[:, 0], view.own_states[:, 1]
    return np.abs(g1 * a * (pb - pa) + g2 * a * (vb - va) - view.messages)


def hypothesis_from_weights(view: AdversaryView, weights: np.ndarray, position_offset: float = 0.0) -> Hypothesis:
    """Solve the collected equations for the victim given a weight guess."""
    a = np.asarray(weights, dtype=float)
    u = view.messages
    if view.order == "first":
        return Hypothesis(a, view.own_states[:, 0] + u / a)
    g1, g2 = _gamma_pair(view.gains)
    pa, va = view.own_states[:, 0], view.own_states[:, 1]
    pb = pa + position_offset
    vb = va + (u / a - g1 * position_offset) / g2
    return Hypothesis(a, np.column_stack([pb, vb]))


def enumerate_consistent_hypotheses(
    view: AdversaryView,
    count: int = 2,
    reference_weights: np.ndarray | None = None,
    tol: float = 1e-9,
) -> list[Hypothesis]:
    """``count`` distinct victim assignments reproducing every collected message.

    Weights are ``c * reference`` for scales c spread over the admissible
    range (``reference`` defaults to the public base weight at every step).

    Raises:
        InfeasibleWitness: the interval admits only one scale (delta = 0).
    """
    if view.kind != "malicious":
        raise ValueError("hypotheses need a malicious-neighbor view")
    steps = len(view.messages)
    ref = np.full(steps, view.base_weight) if reference_weights is None else np.asarray(reference_weights, float)
    lo, hi = view.interval()
    c_lo, c_hi = admissible_scale_range(ref, lo, hi)
    if not c_hi - c_lo > 1e-12:
        raise InfeasibleWitness("structural interval is a single point; privacy is reduced")
    scales = np.linspace(c_lo, c_hi, count + 2)[1:-1] if count > 1 else np.array([1.0])
    out = []
    for j, c in enumerate(scales):
        hyp = hypothesis_from_weights(view, c * ref, position_offset=float(j))
        res = equation_residuals(view, hyp)
        scale = max(1.0, float(np.abs(view.messages).max(initial=0.0)))
        if res.size and res.max() > tol * scale:
            raise InfeasibleWitness(f"hypothesis {j} misses the equations by {res.max():.3g}")
        if np.any(hyp.weights < lo) or np.any(hyp.weights > hi):
            raise InfeasibleWitness(f"hypothesis {j} leaves the structural interval")
        out.append(hyp)
    return out


# -------------------------------------------------------- constant weight attack


def constant_weight_attack(view: AdversaryView, tol: float = 1e-9, epsilon: float | None = None) -> AttackResult:
    """Exploit a constant a_AB in a first-order malicious view.

    Looks for a step T with u[T]/u[0] = x_A[T]/x_A[0] = beta, which forces
    x_B[T] = beta x_B[0].  Under a constant weight the equations pin every
    x_B[k] = x_A[k] + u[k]/a up to the single unknown a.  When the victim's only
    neighbor is the attacker, the victim's public update (with the weights the
    attacker assigns it) fixes a, and the states come out concretely.
    """
    if view.kind != "malicious" or view.order != "first":
        return AttackResult("not_applicable", "needs a first-order malicious view")
    u = view.messages
    xa = view.own_states[:, 0]
    if len(u) < 2:
        return AttackResult("not_applicable", "fewer than two collected messages")
    if u[0] == 0 or xa[0] == 0:
        return AttackResult("not_applicable", "u[0] or x_A[0] is zero; ratios undefined")
    T = None
    beta = None
    for t in range(1, len(u)):
        b = xa[t] / xa[0]
        if abs(u[t] / u[0] - b) <= tol * max(1.0, abs(b)):
            T, beta = t, float(b)
            break
    if T is None:
        return AttackResult("not_applicable", "no step satisfies the ratio condition")

    w_own = view.own_weights_to_victim
    sole = tuple(view.victim_in_neighbors) == (view.attacker,)
    if epsilon is None or w_own is None or not sole or len(w_own) < T:
        return AttackResult("relation", "x_B[T] = beta * x_B[0]; weight unresolved", T, beta)
    # victim update x_B[k+1] = x_B[k] + eps w[k] (x_A[k] - x_B[k]) with x_B[k] = x_A[k] + s u[k]
    ks = np.arange(len(u) - 1)
    ks = ks[ks < len(w_own)]
    coef = u[ks + 1] - u[ks] + epsilon * w_own[ks] * u[ks]
    rhs = xa[ks] - xa[ks + 1]
    if not np.any(np.abs(coef) > 0):
        return AttackResult("relation", "victim dynamics carry no information on the weight", T, beta)
    s = float(coef @ rhs / (coef @ coef))
    resid = float(np.abs(coef * s - rhs).max())
    if resid > 1e-6 * max(1.0, float(np.abs(rhs).max())):
        return AttackResult("relation", "constant-weight hypothesis inconsistent with victim dynamics", T, beta)
    states = xa + s * u
    return AttackResult("recovered", "", T, beta, 1.0 / s, states)


# ----------------------------------------------------------------- eavesdropper


def eavesdropper_analysis(
    view: AdversaryView,
    truth: dict[tuple[int, int, int], float] | None = None,
    wrong_key: tuple[PaillierPublicKey, PaillierPrivateKey] | None = None,
    seed: int = 0,
) -> EavesdropperReport:
    """Ciphertext-only statistics.

    Args:
        view: eavesdropper view.
        truth: optional ``(step, receiver, sender) -> u`` map for Step-2 replies;
            enables the wrong-key decryption correlation test.
        wrong_key: keypair unrelated to the run; generated from ``seed`` if omitted.
    """
    msgs = view.ciphertexts
    cts = [(m, c) for m in msgs for c in m.payload]
    if not cts:
        return EavesdropperReport(0, 0, 0, 0, None, None, None)
    values = [c.value for _, c in cts]
    distinct = len(set(values))
    residues = np.array([c.value / view.public_keys[m.key_owner].n_squared for m, c in cts])
    corr = None
    if truth:
        if wrong_key is None:
            wrong_key = keygen(64, random.Random(seed))
        wpub, wpriv = wrong_key
        guessed, actual = [], []
        for m, c in cts:
            if m.phase != Phase.STEP2:
                continue
            key = (m.step, m.receiver, m.sender)
            if key not in truth:
                continue
            reduced = c.value % wpub.n_squared
            if reduced == 0 or math.gcd(reduced, wpub.n) != 1:
                continue
            plain = decrypt(wpriv, wpub, Ciphertext(reduced))
            if plain > wpub.n // 2:
                plain -= wpub.n
            guessed.append(plain / wpub.n)
            actual.append(truth[key])
        if len(guessed) > 2 and np.std(actual) > 0 and np.std(guessed) > 0:
            corr = float(np.corrcoef(guessed, actual)[0, 1])
    return EavesdropperReport(
        n_messages=len(msgs),
        n_ciphertexts=len(cts),
        distinct_ciphertexts=distinct,
        collisions=len(cts) - distinct,
        residue_mean=float(residues.mean()),
        residue_std=float(residues.std()),
        wrong_key_correlation=corr,
    )


def truth_from_transcript(transcript: Transcript) -> dict[tuple[int, int, int], float]:
    """Decrypted Step-2 values keyed by (step, receiver, sender); test-harness only."""
    return {(r.step, agent, r.sender): r.value for agent, items in transcript.received.items() for r in items}


def crafted_eigenvector_initials(topology: Topology, epsilon: float, scale: float = 10.0) -> np.ndarray:
    """Initial states making x[k] = lambda^k x[0] under constant base weights.

    Leader at 0, followers on a real eigenvector of the follower block of
    I - eps L[0].  Picks the eigenvector whose entries are all distinct from
    the next one so messages are nonzero.
    """
    from .topology import laplacian

    L = laplacian(topology, np.asarray(topology.base_weights))
    idx = [i for i in range(topology.n_agents) if i != topology.leader]
    F = np.eye(len(idx)) - epsilon * L[np.ix_(idx, idx)]
    vals, vecs = np.linalg.eig(F)
    best = None
    for j in np.argsort(-np.abs(vals)):
        if abs(vals[j].imag) > 1e-12 or not 0 < vals[j].real < 1:
            continue
        v = vecs[:, j].real
        if np.all(np.abs(v) > 1e-6):
            best = v
            break
    if best is None:
        raise InfeasibleWitness("no real eigenvector with nonzero entries")
    best = best / np.abs(best).max() * scale
    x0 = np.zeros(topology.n_agents)
    x0[idx] = best
    return x0
