"""Command-line front end: simulate, certify, attack, bench, boundary.

Exit codes: 0 all requested checks passed, 1 a check failed, 2 bad config or
arguments, 3 explicit gains refused by certification (override with --force).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import adversary, spectral
from .dynamics import FirstOrderState, SecondOrderState, consensus_target, simulate, structural_consensus_check
from .errors import ConfigError, ConsensusError
from .export import write_boundary_csv, write_json, write_trajectory_csv, write_transcript_jsonl
from .paillier import decrypt, encrypt, hom_add, hom_scale, keygen
from .protocol import codec_error_bound, run_encrypted_simulation
from .topology import Topology, five_agent_topology, laplacian_stack, canonical_topology, sample_weights, topology_from_dict

log = logging.getLogger("structcons")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3

_TOPOLOGY_SCHEMA = {
    "type": "object",
    "required": ["agents", "leader", "edges", "delta"],
    "properties": {
        "agents": {"oneOf": [{"type": "integer", "minimum": 2}, {"type": "array", "minItems": 2}]},
        "leader": {"type": ["integer", "string"]},
        "edges": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["from", "to"],
                "properties": {
                    "from": {"type": ["integer", "string"]},
                    "to": {"type": ["integer", "string"]},
                    "weight": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "delta": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["topology", "initial"],
    "properties": {
        "topology": {"oneOf": [{"enum": ["canonical", "canonical5"]}, _TOPOLOGY_SCHEMA]},
        "order": {"enum": ["first", "second"]},
        "initial": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}},
                {
                    "type": "object",
                    "required": ["p", "v"],
                    "properties": {
                        "p": {"type": "array", "items": {"type": "number"}},
                        "v": {"type": "array", "items": {"type": "number"}},
                    },
                },
            ]
        },
        "gains": {
            "oneOf": [
                {"const": "auto"},
                {"type": "object", "required": ["epsilon"], "properties": {"epsilon": {"type": "number"}}},
                {
                    "type": "object",
                    "required": ["gamma1", "gamma2"],
                    "properties": {"gamma1": {"type": "number"}, "gamma2": {"type": "number"}},
                },
            ]
        },
        "horizon": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "codec": {"type": "object", "properties": {"frac_bits": {"type": "integer", "minimum": 0}}},
        "key_bits": {"type": "integer", "minimum": 16},
        "samples": {"type": "integer", "minimum": 1},
        "attack": {
            "type": "object",
            "properties": {
                "attacker": {"type": ["integer", "string"]},
                "victim": {"type": ["integer", "string"]},
                "k_c": {"type": "integer", "minimum": 0},
                "crafted": {"type": "boolean"},
            },
        },
    },
}


class RunConfig:
    """Validated configuration; ``initial`` is stored in the topology's internal agent order."""

    def __init__(self, raw: dict[str, Any]) -> None:
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: {exc.message}") from None
        self.raw = raw
        topo = raw["topology"]
        if topo == "canonical":
            self.topology = canonical_topology()
        elif topo == "canonical5":
            self.topology = five_agent_topology()
        else:
            self.topology = topology_from_dict(topo)
        self.order = raw.get("order", "first")
        self.gains_spec = raw.get("gains", "auto")
        self.horizon = raw.get("horizon", 500 if self.order == "first" else 1000)
        self.seed = raw.get("seed", 0)
        self.tol = raw.get("tol", 1e-6)
        self.frac_bits = raw.get("codec", {}).get("frac_bits", 32)
        self.key_bits = raw.get("key_bits", 512)
        self.samples = raw.get("samples", 2000)
        self.attack = raw.get("attack", {})
        self.initial = self._initial(raw["initial"], topo)

    def _reorder(self, values: Sequence[float], topo_raw) -> np.ndarray:
        """Map values given in the config's agent order onto the internal order."""
        n = self.topology.n_agents
        if len(values) != n:
            raise ConfigError(f"initial state has {len(values)} entries, topology has {n} agents")
        if isinstance(topo_raw, dict):
            agents = topo_raw["agents"]
            given = [str(a) for a in agents] if isinstance(agents, list) else [str(i) for i in range(n)]
        else:
            given = list(self.topology.names)
        out = np.empty(n)
        for name, val in zip(given, values):
            out[self.topology.names.index(name)] = val
        return out

    def _initial(self, init, topo_raw):
        if self.order == "first":
            if not isinstance(init, list):
                raise ConfigError("first-order runs need a list of initial states")
            return FirstOrderState(self._reorder(init, topo_raw))
        if not isinstance(init, dict):
            raise ConfigError("second-order runs need {'p': [...], 'v': [...]}")
        return SecondOrderState(self._reorder(init["p"], topo_raw), self._reorder(init["v"], topo_raw))

    def agent(self, ref) -> int:
        return self.topology.index_of(ref) if isinstance(ref, int) else self.topology.names.index(str(ref))


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return RunConfig(raw)


# ----------------------------------------------------------------- helpers


def _resolve_gains(cfg: RunConfig, force: bool) -> tuple[Any, dict[str, Any], bool]:
    """Return (gains, certification info, refused)."""
    topo = cfg.topology
    info: dict[str, Any] = {}
    if cfg.order == "first":
        bound = spectral.epsilon_bound(topo)
        info["epsilon_bound"] = bound
        if cfg.gains_spec == "auto":
            eps = 0.9 * bound
        else:
            eps = float(cfg.gains_spec["epsilon"])
        info["epsilon"] = eps
        info["certified"] = eps < bound
        return eps, info, not info["certified"] and not force
    if cfg.gains_spec == "auto":
        gains = spectral.select_gamma(topo, seed=cfg.seed, n_samples=cfg.samples)
        info.update(_gains_info(gains))
        info["certified"] = True
        return gains, info, False
    g1, g2 = float(cfg.gains_spec["gamma1"]), float(cfg.gains_spec["gamma2"])
    mus = spectral.sampled_nonzero_eigenvalues(topo, cfg.samples, cfg.seed)
    ok = spectral.gamma_conditions_hold(mus.ravel(), g1, g2)
    info.update(gamma1=g1, gamma2=g2, certified=ok)
    if ok:
        info["boundary_margin"] = spectral.boundary_margin(mus, g1, g2)
    return (g1, g2), info, not ok and not force


def _gains_info(g: spectral.SecondOrderGains) -> dict[str, Any]:
    out = {k: getattr(g, k) for k in ("gamma1", "gamma2", "rho", "kappa", "varrho", "theta_rho")}
    if g.box is not None:
        out["box"] = {"theta_max": g.box.theta_max, "r_min": g.box.r_min, "r_max": g.box.r_max}
    return out


def _max_radius(topo: Topology, gains, n: int, seed: int) -> float:
    Ls = laplacian_stack(topo, sample_weights(topo, n, seed).weights)
    return max(spectral.spectral_radius_excess(spectral.iteration_matrix(L, gains, topo.leader)) for L in Ls)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    gains, info, refused = _resolve_gains(cfg, args.force)
    if refused:
        print(f"refused: gains are not certified ({info}); rerun with --force", file=sys.stderr)
        return EXIT_REFUSED
    out = _out_dir(args)
    names = cfg.topology.names
    report: dict[str, Any] = {"order": cfg.order, "seed": seed, "horizon": cfg.horizon, "gains": info}
    target = consensus_target(cfg.topology, cfg.initial, cfg.horizon)
    report["target"] = target
    ok = True
    plain = enc = None
    if args.mode in ("plaintext", "both"):
        plain = simulate(cfg.topology, cfg.initial, gains, cfg.horizon, seed=seed)
        chk = structural_consensus_check(plain, cfg.tol)
        report["plaintext"] = {"consensus": chk.passed, "deviation": chk.deviation, "rate": chk.rate}
        write_trajectory_csv(out / "trajectory_plaintext.csv", plain, names)
        ok &= chk.passed
    if args.mode in ("encrypted", "both"):
        t0 = time.perf_counter()
        run = run_encrypted_simulation(
            cfg.topology, cfg.initial, gains, cfg.horizon, seed, cfg.frac_bits, cfg.key_bits
        )
        enc = run.trajectory
        chk = structural_consensus_check(enc, max(cfg.tol, 1e-3))
        report["encrypted"] = {
            "consensus": chk.passed,
            "deviation": chk.deviation,
            "messages": len(run.transcript.messages),
            "seconds": time.perf_counter() - t0,
        }
        write_trajectory_csv(out / "trajectory_encrypted.csv", enc, names)
        write_transcript_jsonl(out / "transcript.jsonl", run.transcript)
        ok &= chk.passed
    if plain is not None and enc is not None:
        dev = float(np.abs(plain.states - enc.states).max())
        bound = codec_error_bound(
            cfg.horizon, cfg.topology.n_agents, cfg.frac_bits, float(np.abs(plain.states).max())
        )
        report["equivalence"] = {"max_deviation": dev, "bound": bound, "within_bound": dev <= bound}
        ok &= dev <= bound
    report["ok"] = bool(ok)
    write_json(out / "report.json", report)
    for mode in ("plaintext", "encrypted"):
        if mode in report:
            r = report[mode]
            print(f"{mode}: consensus: {str(r['consensus']).lower()}, target {target}, deviation {r['deviation']:.3g}")
    if "equivalence" in report:
        print(f"encrypted-vs-plaintext max deviation {report['equivalence']['max_deviation']:.3g}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_certify(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    gains, info, _ = _resolve_gains(cfg, force=True)
    topo = cfg.topology
    radius = _max_radius(topo, gains, 200, seed)
    info["sampled_spectral_radius_excess"] = radius
    info["empirically_convergent"] = radius < 1
    if cfg.order == "first":
        Ls = laplacian_stack(topo, sample_weights(topo, 200, seed).weights)
        info["gershgorin_all_samples"] = all(spectral.gershgorin_check(L, gains) for L in Ls)
        print(f"epsilon bound {info['epsilon_bound']:.6g}; epsilon {info['epsilon']:.6g}", end="")
        print("" if info["certified"] else " exceeds the bound (not certified)")
    else:
        mus = spectral.sampled_nonzero_eigenvalues(topo, cfg.samples, seed + 1)
        g1, g2 = spectral._gamma_pair(gains)
        info["inside_boundary"] = spectral.gamma_conditions_hold(mus.ravel(), g1, g2)
        info["boundary_margin"] = spectral.boundary_margin(mus, g1, g2)
        print(f"gamma1 {g1:.6g}, gamma2 {g2:.6g}; all sampled eigenvalues inside boundary: {info['inside_boundary']}")
    print(f"max sampled spectral radius (excluding unit eigenvalues) {radius:.6g}")
    if args.out:
        write_json(_out_dir(args) / "certify.json", info)
    print(json.dumps(info, default=float, sort_keys=True))
    # --force accepts an uncertified gain when the sampled radius still shows convergence
    ok = radius < 1 and info.get("inside_boundary", True) and (info["certified"] or args.force)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_attack(args) -> int:
    cfg = load_config(args.config)
    if cfg.order != "first" and args.mode == "constant":
        raise ConfigError("the constant-weight attack is defined for first-order runs")
    seed = cfg.seed if args.seed is None else args.seed
    gains, info, refused = _resolve_gains(cfg, args.force)
    if refused:
        print("refused: gains are not certified; rerun with --force", file=sys.stderr)
        return EXIT_REFUSED
    topo = cfg.topology
    att = cfg.attack
    attacker = cfg.agent(att.get("attacker", topo.names[1]))
    default_victim = topo.in_neighbors(attacker)[-1] if topo.in_neighbors(attacker) else 0
    victim = cfg.agent(att.get("victim", topo.names[default_victim]))
    k_c = att.get("k_c", 10)
    initial = cfg.initial
    if att.get("crafted", False) and cfg.order == "first":
        initial = FirstOrderState(adversary.crafted_eigenvector_initials(topo, float(gains)))
    horizon = k_c + 2
    run = run_encrypted_simulation(
        topo, initial, gains, horizon, seed, cfg.frac_bits, min(cfg.key_bits, 128), args.mode == "constant"
    )
    view = adversary.build_malicious_view(
        run.transcript, topo, attacker, victim, k_c, gains, attacker_node=run.network.nodes[attacker]
    )
    report: dict[str, Any] = {"mode": args.mode, "attacker": topo.names[attacker], "victim": topo.names[victim]}
    ok = True
    if view.kind == "malicious":
        eq = adversary.underdetermination_report(view)
        report["equations"], report["unknowns"], report["deficiency"] = eq
        report["multi_victim"] = adversary.multi_victim_report(run.transcript, topo, attacker, k_c)._asdict()
        try:
            hyps = adversary.enumerate_consistent_hypotheses(view, 2)
            report["witnesses"] = [
                {"weights": h.weights.tolist(), "victim_states": h.victim_states.tolist()} for h in hyps
            ]
        except ConsensusError as exc:
            report["witnesses"] = str(exc)
            ok = False
        if cfg.order == "first":
            res = adversary.constant_weight_attack(view, epsilon=float(gains))
            report["constant_weight_attack"] = {
                "status": res.status,
                "reason": res.reason,
                "T": res.T,
                "beta": res.beta,
                "weight": res.weight,
                "recovered_states": None if res.victim_states is None else res.victim_states.tolist(),
            }
            if res.victim_states is not None:
                truth = run.trajectory.states[: k_c + 1, victim]
                report["constant_weight_attack"]["max_error"] = float(np.abs(res.victim_states - truth).max())
            # constant weights should leak, time-varying ones should not
            ok &= (res.status == "recovered") == (args.mode == "constant")
    else:
        report["note"] = "attacker only relays the victim's ciphertexts; no plaintext equations"
    eav = adversary.eavesdropper_analysis(
        adversary.build_eavesdropper_view(run.transcript), adversary.truth_from_transcript(run.transcript), seed=seed
    )
    report["eavesdropper"] = eav.to_json()
    if args.out:
        write_json(_out_dir(args) / "attack.json", report)
    report["ok"] = bool(ok)
    print(json.dumps(report, indent=2, default=float))
    return EXIT_OK if ok else EXIT_FAIL


def bench_table(key_bits: Sequence[int], trials: int, seed: int = 0) -> dict[str, dict[int, float]]:
    """Mean milliseconds per operation of one first-order exchange, per key size.

    ``key_bits`` is the bit length of each Paillier prime.  Rows: Encryption
    (Alice's E(-x_A)), Controller (Bob's encryption-free homomorphic add and
    scale), Decryption.
    """
    table: dict[str, dict[int, float]] = {"Encryption": {}, "Controller": {}, "Decryption": {}}
    if trials <= 0:
        return {k: {} for k in table}
    rng = random.Random(seed)
    for bits in key_bits:
        if bits < 16:
            raise ValueError("key bits must be >= 16")
        pub, priv = keygen(bits, rng)
        t_enc = t_ctl = t_dec = 0.0
        for _ in range(trials):
            m1, m2 = rng.randrange(pub.n), rng.randrange(pub.n)
            a = rng.randrange(1, 1 << 16)
            t0 = time.perf_counter()
            c1 = encrypt(pub, m1, rng)
            t1 = time.perf_counter()
            c2 = encrypt(pub, m2, rng)
            t2 = time.perf_counter()
            c = hom_scale(pub, hom_add(pub, c1, c2), a)
            t3 = time.perf_counter()
            m = decrypt(priv, pub, c)
            t4 = time.perf_counter()
            assert m == a * (m1 + m2) % pub.n
            t_enc += t1 - t0
            t_ctl += t3 - t2
            t_dec += t4 - t3
        table["Encryption"][bits] = 1e3 * t_enc / trials
        table["Controller"][bits] = 1e3 * t_ctl / trials
        table["Decryption"][bits] = 1e3 * t_dec / trials
    return table


def format_table(table: dict[str, dict[int, float]], key_bits: Sequence[int]) -> str:
    cols = [b for b in key_bits if b in table["Encryption"]]
    lines = ["Key bits".ljust(16) + "".join(f"{b:>12}" for b in cols)]
    for row, vals in table.items():
        lines.append(f"{row} (ms)".ljust(16) + "".join(f"{vals[b]:>12.4f}" for b in cols))
    return "\n".join(lines)


def cmd_bench(args) -> int:
    table = bench_table(args.key_bits, args.trials, args.seed or 0)
    print(format_table(table, args.key_bits))
    if args.out:
        write_json(_out_dir(args) / "bench.json", {r: {str(k): v for k, v in c.items()} for r, c in table.items()})
    return EXIT_OK


def cmd_boundary(args) -> int:
    pts = spectral.boundary_curve(args.gamma1, args.rho, args.samples)
    samples = None
    if args.config:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        samples = spectral.sampled_nonzero_eigenvalues(cfg.topology, args.eig_samples, seed)
    out = _out_dir(args) / "boundary.csv"
    write_boundary_csv(out, pts, samples)
    summary = {"points": len(pts), "out": str(out)}
    ok = True
    if samples is not None:
        g2 = args.rho * args.gamma1
        summary["boundary_margin"] = spectral.boundary_margin(samples, args.gamma1, g2)
        summary["inside"] = spectral.gamma_conditions_hold(samples.ravel(), args.gamma1, g2)
        ok = summary["inside"]
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if ok else EXIT_FAIL


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structcons", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--force", action="store_true", help="run even with uncertified gains")

    p = sub.add_parser("simulate", help="plaintext and/or encrypted consensus run")
    common(p)
    p.add_argument("--mode", choices=["plaintext", "encrypted", "both"], default="plaintext")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="report gain bounds and sampled spectral radii")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("attack", help="malicious-neighbor and eavesdropper analyses")
    common(p)
    p.add_argument("--mode", choices=["constant", "varying"], default="varying")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="Paillier timing table")
    p.add_argument("--key-bits", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("boundary", help="export the eigenvalue boundary curve as CSV")
    common(p, config_required=False)
    p.add_argument("--gamma1", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--samples", type=int, default=361)
    p.add_argument("--eig-samples", type=int, default=200)
    p.set_defaults(func=cmd_boundary)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("CONSENSUS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsensusError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
