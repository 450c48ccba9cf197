"""Encrypted neighbor exchanges run as agent state machines on a simulated network.

For every edge B -> A (A reads B) each round runs:

    Step 1 (A): E_A(-x_A) -> B                       (second order: E_A(-p_A), E_A(-v_A))
    Step 2 (B): (E_A(x_B) E_A(-x_A))^a_AB -> A      (second order: gamma-scaled p and v
                                                      terms combined before sending)
    Step 3 (A): decrypt u_AB = a_AB (x_B - x_A)

Rounds are barrier-synchronized: every Step 1, then every Step 2, then every
decryption, then all state updates.  A multiplies the first-order sum by
epsilon locally; second-order messages already carry gamma1, gamma2.
"""
from __future__ import annotations

import json
import random
import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from .dynamics import FirstOrderState, SecondOrderState, State, Trajectory
from .errors import DecryptFailed, InvalidCiphertext, ValueOutOfRange
from .paillier import (
    Ciphertext,
    FixedPointCodec,
    PaillierPrivateKey,
    PaillierPublicKey,
    decrypt,
    encrypt,
    hom_add,
    hom_scale,
    keygen,
)
from .spectral import _gamma_pair
from .topology import Topology, WeightSchedule, edge_seeds, edge_weight_stream


class Phase(str, Enum):
    STEP1 = "step1"
    STEP2 = "step2"


@dataclass(frozen=True)
class WireMessage:
    sender: int
    receiver: int
    step: int
    phase: Phase
    payload: tuple[Ciphertext, ...]
    key_owner: int
    label: str = ""

    def to_json(self) -> dict:
        return {
            "from": self.sender,
            "to": self.receiver,
            "step": self.step,
            "phase": self.phase.value,
            "label": self.label,
            "key_owner": self.key_owner,
            "payload": [c.hex() for c in self.payload],
        }


@dataclass(frozen=True)
class Received:
    step: int
    sender: int
    value: float


@dataclass
class Transcript:
    """Append-only record of the wire plus what each agent legitimately saw."""

    order: str
    public_keys: dict[int, PaillierPublicKey] = field(default_factory=dict)
    messages: list[WireMessage] = field(default_factory=list)
    received: dict[int, list[Received]] = field(default_factory=dict)
    states: dict[int, list[tuple[float, ...]]] = field(default_factory=dict)

    def record_message(self, msg: WireMessage) -> None:
        self.messages.append(msg)

    def record_received(self, agent: int, item: Received) -> None:
        self.received.setdefault(agent, []).append(item)

    def record_state(self, agent: int, state: tuple[float, ...]) -> None:
        self.states.setdefault(agent, []).append(state)

    def u_series(self, receiver: int, sender: int) -> np.ndarray:
        """Decrypted messages u_{receiver,sender}[k] in step order."""
        items = sorted((r for r in self.received.get(receiver, []) if r.sender == sender), key=lambda r: r.step)
        return np.array([r.value for r in items])

    def own_states(self, agent: int) -> np.ndarray:
        return np.array(self.states.get(agent, []))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m.to_json(), sort_keys=True) + "\n" for m in self.messages)


def _weight_int(codec: FixedPointCodec, w: float) -> int:
    """Non-negative fixed-point exponent for a positive real factor."""
    if not w >= 0:
        raise ValueError("exponent factor must be non-negative")
    m = round(w * codec.scale)
    if m >= codec.modulus:
        raise ValueOutOfRange("exponent factor too large for the codec")
    return m


class AgentNode:
    """One agent: its state, its keypair, and the weights it assigns to its readers."""

    def __init__(
        self,
        agent_id: int,
        topology: Topology,
        state: State,
        gains,
        frac_bits: int,
        keypair: tuple[PaillierPublicKey, PaillierPrivateKey] | None,
        crypto_rng: random.Random | secrets.SystemRandom,
        weight_streams: dict[int, Iterator[float]],
    ) -> None:
        self.id = agent_id
        self.is_leader = agent_id == topology.leader
        self.neighbors = topology.in_neighbors(agent_id)
        self.readers = topology.out_neighbors(agent_id)
        self.order = "first" if isinstance(state, FirstOrderState) else "second"
        i = agent_id
        if self.order == "first":
            self.x = float(state.x[i])
        else:
            self.p, self.v = float(state.p[i]), float(state.v[i])
        self.gains = gains
        self.frac_bits = frac_bits
        self.public_key = keypair[0] if keypair else None
        self._private_key = keypair[1] if keypair else None
        self.codec = FixedPointCodec(frac_bits, self.public_key.n) if keypair else None
        self._rng = crypto_rng
        self._weights = weight_streams
        self.weight_log: dict[int, list[float]] = {r: [] for r in self.readers}
        self._inbox: list[Received] = []

    # -- state access
    def snapshot(self) -> tuple[float, ...]:
        return (self.x,) if self.order == "first" else (self.p, self.v)

    # -- Step 1 (Alice)
    def request(self, bob: int, k: int) -> list[WireMessage]:
        pub, codec = self.public_key, self.codec
        if self.order == "first":
            parts = [("x", -self.x)]
        else:
            parts = [("p", -self.p), ("v", -self.v)]
        return [
            WireMessage(self.id, bob, k, Phase.STEP1, (encrypt(pub, codec.encode(val), self._rng),), self.id, label)
            for label, val in parts
        ]

    # -- Step 2 (Bob)
    def respond(self, requests: list[WireMessage], alice_key: PaillierPublicKey, k: int) -> WireMessage:
        alice = requests[0].sender
        codec = FixedPointCodec(self.frac_bits, alice_key.n)
        a = next(self._weights[alice])
        self.weight_log[alice].append(a)
        by_label = {m.label: m.payload[0] for m in requests}
        if self.order == "first":
            diff = hom_add(alice_key, encrypt(alice_key, codec.encode(self.x), self._rng), by_label["x"])
            out = hom_scale(alice_key, diff, _weight_int(codec, a))
        else:
            g1, g2 = _gamma_pair(self.gains)
            dp = hom_add(alice_key, encrypt(alice_key, codec.encode(self.p), self._rng), by_label["p"])
            dv = hom_add(alice_key, encrypt(alice_key, codec.encode(self.v), self._rng), by_label["v"])
            out = hom_add(
                alice_key,
                hom_scale(alice_key, dp, _weight_int(codec, g1 * a)),
                hom_scale(alice_key, dv, _weight_int(codec, g2 * a)),
            )
        return WireMessage(self.id, alice, k, Phase.STEP2, (out,), alice, "u")

    # -- Step 3 (Alice)
    def absorb(self, reply: WireMessage) -> float:
        try:
            m = decrypt(self._private_key, self.public_key, reply.payload[0])
        except InvalidCiphertext as exc:
            raise DecryptFailed(str(exc)) from exc
        u = self.codec.decode(m, scale_levels=2)
        self._inbox.append(Received(reply.step, reply.sender, u))
        return u

    def update(self) -> list[Received]:
        """Apply the summed inputs of this round and clear the inbox."""
        total = sum(r.value for r in self._inbox)
        if self.order == "first":
            if self._inbox:
                self.x += float(self.gains) * total
        else:
            self.p, self.v = self.p + self.v, self.v + total
        done, self._inbox = self._inbox, []
        return done


@dataclass
class Network:
    topology: Topology
    nodes: list[AgentNode]
    transcript: Transcript

    @property
    def order(self) -> str:
        return self.transcript.order

    def node(self, i: int) -> AgentNode:
        return self.nodes[i]


def pair_exchange_first(alice: AgentNode, bob: AgentNode, k: int) -> tuple[float, list[WireMessage]]:
    """One first-order exchange; Alice ends up with a_AB (x_B - x_A)."""
    req = alice.request(bob.id, k)
    reply = bob.respond(req, alice.public_key, k)
    return alice.absorb(reply), req + [reply]


def pair_exchange_second(alice: AgentNode, bob: AgentNode, k: int) -> tuple[float, list[WireMessage]]:
    """One second-order exchange; Alice ends up with g1 a (p_B - p_A) + g2 a (v_B - v_A)."""
    req = alice.request(bob.id, k)
    reply = bob.respond(req, alice.public_key, k)
    return alice.absorb(reply), req + [reply]


def run_round(network: Network, k: int) -> list[WireMessage]:
    """All exchanges of step ``k``, then the synchronized state update."""
    topo = network.topology
    tr = network.transcript
    requests = {}
    for bob, alice in topo.edges:
        requests[(bob, alice)] = network.nodes[alice].request(bob, k)
    replies = {}
    for (bob, alice), req in requests.items():
        replies[(bob, alice)] = network.nodes[bob].respond(req, network.nodes[alice].public_key, k)
    for (bob, alice), reply in replies.items():
        network.nodes[alice].absorb(reply)
    delta: list[WireMessage] = []
    for key in requests:
        delta.extend(requests[key])
    delta.extend(replies.values())
    for msg in delta:
        tr.record_message(msg)
    for node in network.nodes:
        for item in node.update():
            tr.record_received(node.id, item)
        tr.record_state(node.id, node.snapshot())
    return delta


def _crypto_rng(seed: int | None, agent: int):
    if seed is None:
        return secrets.SystemRandom()
    state = np.random.SeedSequence(seed, spawn_key=(1 << 32, agent)).generate_state(4)
    return random.Random(int.from_bytes(state.tobytes(), "little"))


def _constant_stream(w: float) -> Iterator[float]:
    while True:
        yield w


def build_network(
    topology: Topology,
    initial: State,
    gains,
    seed: int | None = None,
    frac_bits: int = 32,
    prime_bits: int = 512,
    constant_weights: bool = False,
) -> Network:
    """Create agents, keys (for every agent that reads a neighbor) and weight streams."""
    order = "first" if isinstance(initial, FirstOrderState) else "second"
    streams: dict[int, dict[int, Iterator[float]]] = {i: {} for i in range(topology.n_agents)}
    for e, ss in enumerate(edge_seeds(seed, topology.n_edges)):
        src, dst = topology.edges[e]
        if constant_weights:
            streams[src][dst] = _constant_stream(topology.base_weights[e])
        else:
            streams[src][dst] = edge_weight_stream(topology, e, ss)
    transcript = Transcript(order)
    nodes = []
    for i in range(topology.n_agents):
        rng = _crypto_rng(seed, i)
        keypair = keygen(prime_bits, rng) if topology.in_neighbors(i) else None
        node = AgentNode(i, topology, initial, gains, frac_bits, keypair, rng, streams[i])
        if keypair:
            transcript.public_keys[i] = keypair[0]
        transcript.record_state(i, node.snapshot())
        nodes.append(node)
    return Network(topology, nodes, transcript)


@dataclass
class EncryptedRun:
    trajectory: Trajectory
    transcript: Transcript
    network: Network


def network_states(network: Network) -> np.ndarray:
    """Stack the transcript's per-agent states into trajectory rows."""
    tr = network.transcript
    n = network.topology.n_agents
    cols = [np.array(tr.states[i]) for i in range(n)]
    if network.order == "first":
        return np.column_stack([c[:, 0] for c in cols])
    return np.column_stack([c[:, 0] for c in cols] + [c[:, 1] for c in cols])


def realized_schedule(network: Network) -> WeightSchedule | None:
    """Weights drawn by the senders, gathered for analysis (no agent sees this)."""
    topo = network.topology
    cols = [network.nodes[src].weight_log[dst] for src, dst in topo.edges]
    if not cols or not cols[0]:
        return None
    return WeightSchedule(topo, np.column_stack(cols))


def run_encrypted_simulation(
    topology: Topology,
    initial: State,
    gains,
    horizon: int,
    seed: int | None = None,
    frac_bits: int = 32,
    prime_bits: int = 512,
    constant_weights: bool = False,
) -> EncryptedRun:
    """Full encrypted run; with the same ``seed`` the weights match :func:`simulate`."""
    network = build_network(topology, initial, gains, seed, frac_bits, prime_bits, constant_weights)
    for k in range(horizon):
        run_round(network, k)
    traj = Trajectory(network_states(network), network.order, realized_schedule(network), gains, topology.leader)
    return EncryptedRun(traj, network.transcript, network)


def plaintext_transcript(trajectory: Trajectory, topology: Topology) -> Transcript:
    """Transcript an honest run would leave, rebuilt from a plaintext trajectory.

    Carries states and decrypted messages only (no wire traffic); used as an
    exact oracle for the adversary analyses.
    """
    sched = trajectory.schedule
    if sched is None:
        raise ValueError("trajectory has no weight schedule")
    tr = Transcript(trajectory.order)
    S = trajectory.states
    n = topology.n_agents
    for k in range(S.shape[0]):
        for i in range(n):
            tr.record_state(i, (S[k, i],) if trajectory.order == "first" else (S[k, i], S[k, n + i]))
    if trajectory.order == "second":
        g1, g2 = _gamma_pair(trajectory.gains)
    for k in range(S.shape[0] - 1):
        for e, (src, dst) in enumerate(topology.edges):
            a = sched.weights[k, e]
            if trajectory.order == "first":
                u = a * (S[k, src] - S[k, dst])
            else:
                u = g1 * a * (S[k, src] - S[k, dst]) + g2 * a * (S[k, n + src] - S[k, n + dst])
            tr.record_received(dst, Received(k, src, float(u)))
    return tr


def codec_error_bound(horizon: int, n_agents: int, frac_bits: int, max_state: float) -> float:
    """Per-step envelope horizon * N * 2^(2-f) * max|state| on encrypted-vs-plaintext drift."""
    return horizon * n_agents * 2.0 ** (2 - frac_bits) * max_state
