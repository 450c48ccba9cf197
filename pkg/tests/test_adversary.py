import numpy as np
import pytest

from structcons import adversary as adv
from structcons.dynamics import FirstOrderState, SecondOrderState, simulate
from structcons.errors import InfeasibleWitness, NotNeighbors
from structcons.protocol import plaintext_transcript, run_encrypted_simulation
from structcons.topology import build_topology, constant_schedule, five_agent_topology, canonical_topology

A, B = 1, 2
X0 = FirstOrderState(np.array([30.0, 40, 50, -20]))


def _plain_view(k_c=10, seed=1, topo=None, x0=X0, gains=0.3, schedule=None):
    t = topo or canonical_topology()
    traj = simulate(t, x0, gains, k_c + 1, seed=seed, schedule=schedule)
    tr = plaintext_transcript(traj, t)
    own = traj.schedule.weights[:, t.edge_index(A, B)]
    return adv.build_malicious_view(tr, t, A, B, k_c, gains, own_weights=own), traj


def test_view_shapes():
    view, _ = _plain_view(k_c=0)
    assert view.n_equations == 1
    assert adv.underdetermination_report(view) == (1, 2, 1)


def test_eavesdropper_view_has_no_equations():
    run = run_encrypted_simulation(canonical_topology(), X0, 0.3, 3, 0, 8, 32)
    view = adv.build_eavesdropper_view(run.transcript)
    assert view.n_equations == 0
    assert len(view.ciphertexts) == len(run.transcript.messages)


def test_self_attack_and_non_neighbors():
    t = canonical_topology()
    traj = simulate(t, X0, 0.3, 3, seed=0)
    tr = plaintext_transcript(traj, t)
    with pytest.raises(ValueError):
        adv.build_malicious_view(tr, t, A, A, 1)
    with pytest.raises(NotNeighbors):
        adv.build_malicious_view(tr, t, 2, 3, 1)


def test_counts_first_and_second_order():
    view, _ = _plain_view(k_c=10)
    assert adv.underdetermination_report(view) == (11, 22, 11)
    t = canonical_topology()
    s0 = SecondOrderState(np.array([30.0, 40, 50, -20]), np.zeros(4))
    traj = simulate(t, s0, (0.05, 0.12), 11, seed=0)
    v2 = adv.build_malicious_view(plaintext_transcript(traj, t), t, A, B, 10, (0.05, 0.12))
    assert adv.underdetermination_report(v2) == (11, 33, 22)
    for k_c in (0, 3, 7):
        assert adv.underdetermination_report(_plain_view(k_c=k_c)[0]).deficiency == k_c + 1


def test_two_consistent_hypotheses_first_order():
    view, traj = _plain_view(k_c=10)
    hyps = adv.enumerate_consistent_hypotheses(view, 2)
    assert len(hyps) == 2
    assert not np.allclose(hyps[0].victim_states, hyps[1].victim_states)
    for h in hyps:
        assert adv.equation_residuals(view, h).max() <= 1e-9 * max(1, np.abs(view.messages).max())
        lo, hi = view.interval()
        assert np.all((h.weights >= lo) & (h.weights <= hi))


def test_scaling_construction():
    view, traj = _plain_view(k_c=5)
    true_w = traj.schedule.weights[:6, canonical_topology().edge_index(B, A)]
    c = 0.9
    h = adv.hypothesis_from_weights(view, c * true_w)
    xa, xb = traj.states[:6, A], traj.states[:6, B]
    np.testing.assert_allclose(h.victim_states, xa + (xb - xa) / c)
    assert adv.equation_residuals(view, h).max() < 1e-9


def test_second_order_hypotheses():
    t = canonical_topology()
    s0 = SecondOrderState(np.array([30.0, 40, 50, -20]), np.array([0.0, 1, -1, 2]))
    traj = simulate(t, s0, (0.05, 0.12), 11, seed=3)
    view = adv.build_malicious_view(plaintext_transcript(traj, t), t, A, B, 10, (0.05, 0.12))
    hyps = adv.enumerate_consistent_hypotheses(view, 2)
    assert len(hyps) == 2
    for h in hyps:
        assert adv.equation_residuals(view, h).max() <= 1e-9 * max(1, np.abs(view.messages).max())


def test_point_interval_flags_reduced_privacy():
    t = build_topology(4, 0, [(0, 1, 1.0), (2, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0)], 1e-15, ["L", "A", "B", "C"])
    view, _ = _plain_view(k_c=4, topo=t)
    with pytest.raises(InfeasibleWitness):
        adv.enumerate_consistent_hypotheses(view, 2)


def test_constant_weight_attack_crafted_exact():
    t = canonical_topology()
    x0 = adv.crafted_eigenvector_initials(t, 0.3)
    view, traj = _plain_view(k_c=10, x0=FirstOrderState(x0), schedule=constant_schedule(t, 11))
    res = adv.constant_weight_attack(view, epsilon=0.3)
    assert res.status == "recovered"
    assert res.weight == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_allclose(res.victim_states, traj.states[:11, B], rtol=0, atol=1e-9)
    # the ratio relation itself
    assert res.victim_states[res.T] == pytest.approx(res.beta * res.victim_states[0])


def test_constant_weight_attack_not_applicable_for_varying_weights():
    t = canonical_topology()
    x0 = adv.crafted_eigenvector_initials(t, 0.3)
    view, _ = _plain_view(k_c=10, x0=FirstOrderState(x0), seed=5)
    assert adv.constant_weight_attack(view, epsilon=0.3).status == "not_applicable"


def test_constant_weight_attack_zero_message_guard():
    view, _ = _plain_view(k_c=3, x0=FirstOrderState(np.full(4, 2.0)))
    res = adv.constant_weight_attack(view, epsilon=0.3)
    assert res.status == "not_applicable"


def test_ratio_condition_with_beta_two():
    # hand-built view: u and x_A both double at T=2, weight constant
    view = adv.AdversaryView(
        kind="malicious",
        order="first",
        attacker=A,
        victim=B,
        k_c=3,
        own_states=np.array([[1.0], [1.5], [2.0], [2.5]]),
        messages=np.array([3.0, 4.0, 6.0, 5.0]),
        base_weight=1.0,
        delta=0.5,
        victim_in_neighbors=(0, A),
    )
    res = adv.constant_weight_attack(view)
    assert res.status == "relation" and res.T == 2 and res.beta == 2.0


def test_crafted_initials_shape():
    x0 = adv.crafted_eigenvector_initials(canonical_topology(), 0.3)
    assert x0[0] == 0.0
    np.testing.assert_allclose(x0, [0.0, 10 * (np.sqrt(5) - 1) / 2, 10, 10], rtol=1e-9)


def test_eavesdropper_report():
    t = canonical_topology()
    run = run_encrypted_simulation(t, X0, 0.3, 100, 0, 8, 32)
    view = adv.build_eavesdropper_view(run.transcript)
    rep = adv.eavesdropper_analysis(view, adv.truth_from_transcript(run.transcript))
    assert rep.collisions == 0
    assert rep.n_ciphertexts == rep.n_messages == 100 * t.n_edges * 2
    assert abs(rep.wrong_key_correlation) < 0.1
    empty = adv.eavesdropper_analysis(adv.AdversaryView(kind="eavesdropper", order="first"))
    assert empty.n_messages == 0 and empty.wrong_key_correlation is None


def test_encrypted_constant_attack_within_codec_error():
    t = canonical_topology()
    x0 = FirstOrderState(adv.crafted_eigenvector_initials(t, 0.3))
    run = run_encrypted_simulation(t, x0, 0.3, 11, 2, 32, 64, constant_weights=True)
    view = adv.build_malicious_view(run.transcript, t, A, B, 10, 0.3, attacker_node=run.network.nodes[A])
    res = adv.constant_weight_attack(view, tol=1e-6, epsilon=0.3)
    assert res.status == "recovered"
    np.testing.assert_allclose(res.victim_states, run.trajectory.states[:11, B], atol=1e-6)


def test_multi_victim_counts_add_up():
    t = build_topology(
        5, 0, [(0, 1, 1.0), (2, 1, 1.0), (3, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0), (1, 4, 1.0)], 0.5
    )
    traj = simulate(t, FirstOrderState(np.array([0.0, 1, 2, 3, 4])), 0.2, 6, seed=0)
    tr = plaintext_transcript(traj, t)
    # agent 1 reads 2 and 3 (the leader is skipped): 6 equations, 12 unknowns
    assert adv.multi_victim_report(tr, t, 1, 5) == (12, 24, 12)


def test_directed_messages_are_not_antisymmetric():
    # an undirected sole-neighbor shortcut would need u_AB = -u_BA; random weights break it
    t = canonical_topology()
    traj = simulate(t, X0, 0.3, 10, seed=2)
    tr = plaintext_transcript(traj, t)
    u_ab, u_ba = tr.u_series(A, B), tr.u_series(B, A)
    assert not np.allclose(u_ab, -u_ba)
    np.testing.assert_allclose(np.sign(u_ab), -np.sign(u_ba))
