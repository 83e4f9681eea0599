"""Command-line front end.

Subcommands: train, eval, bench, audit-mask, audit-lia.  Every flag can
also be set through an environment variable SPLITFSS_<FLAG> (dashes as
underscores); explicit flags win.  `--role all` runs every role
in-process; a single role name runs just that role over TCP using
--listen/--connect endpoints.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ..nn.specs import TrainConfig, get_network
from ..protocol.client import ClientRole
from ..protocol.dealer import DealerRole
from ..protocol.runner import run_training
from ..protocol.server import PrivateServerRole, PublicServerRole
from ..protocol.session import Mode, SessionConfig
from ..ring import FixedConfig, FixedTensor
from ..transport import PhaseCounters, tcp_accept, tcp_connect, tcp_listen
from .audits import audit_lia_game, audit_mask_uniformity
from .datasets import gen_synthetic, load_idx_pair
from .reports import RunReport, reports_to_csv, write_report

MODES = [m.value for m in Mode]


def _env_default(name: str, fallback=None):
    return os.environ.get(f"SPLITFSS_{name.upper().replace('-', '_')}", fallback)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=MODES, default=_env_default("mode", "ushaped-public"))
    p.add_argument("--network", choices=["1", "2"], default=_env_default("network", "1"))
    p.add_argument(
        "--dataset", choices=["mnist", "fmnist", "synthetic"],
        default=_env_default("dataset", "synthetic"),
    )
    p.add_argument("--data-dir", default=_env_default("data_dir"),
                   help="directory with IDX files for mnist/fmnist")
    p.add_argument("--limit", type=int, default=int(_env_default("limit", 4000)),
                   help="training samples used (from the front)")
    p.add_argument("--test-limit", type=int, default=int(_env_default("test_limit", 1000)))
    p.add_argument("--epochs", type=int, default=int(_env_default("epochs", 2)))
    p.add_argument("--batch", type=int, default=int(_env_default("batch", 32)))
    p.add_argument("--test-batch", type=int, default=int(_env_default("test_batch", 50)))
    p.add_argument("--lr", type=float, default=float(_env_default("lr", 0.1)))
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--ring-bits", type=int, default=int(_env_default("ring_bits", 64)))
    p.add_argument("--frac-bits", type=int, default=int(_env_default("frac_bits", 13)))
    p.add_argument("--chunk", type=int, default=int(_env_default("chunk", 16)),
                   help="preprocessing chunk, in batch steps")
    p.add_argument("--role", default=_env_default("role", "all"),
                   choices=["all", "client", "p0", "p1", "dealer"])
    p.add_argument("--listen", default=_env_default("listen"),
                   help="host:port this role listens on (TCP roles)")
    p.add_argument("--connect", action="append", default=None,
                   help="role=host:port endpoints to reach (repeatable)")
    p.add_argument("--report", default=_env_default("report"))
    p.add_argument("--format", choices=["json", "csv"], default=_env_default("format", "json"))
    p.add_argument("--save-model", default=None)
    p.add_argument("--load-model", default=None)


def build_session(args, mode=None, network=None) -> SessionConfig:
    cfg = FixedConfig(bit_width=args.ring_bits, frac_bits=args.frac_bits)
    net = get_network(network or args.network)
    train = TrainConfig(
        lr=args.lr, batch_size=args.batch, epochs=args.epochs,
        seed=args.seed, test_batch_size=args.test_batch,
    )
    return SessionConfig(
        mode=Mode(mode or args.mode), network=net, train=train, fixed=cfg,
        preprocess_chunk=args.chunk,
    )


def load_datasets(args, cfg: FixedConfig):
    name = args.dataset
    if name == "synthetic":
        train = gen_synthetic(args.limit, classes=10, seed=args.seed, cfg=cfg)
        test = gen_synthetic(args.test_limit, classes=10, seed=args.seed + 1, cfg=cfg)
        return train, test
    if not args.data_dir:
        sys.exit(f"--data-dir is required for dataset {name}")
    train = load_idx_pair(args.data_dir, "train", limit=args.limit, cfg=cfg, name=name)
    test = load_idx_pair(args.data_dir, "t10k", limit=args.test_limit, cfg=cfg, name=name)
    return train, test


def _load_model(path, cfg) -> dict:
    blob = np.load(path)
    out = {}
    for key in {k.rsplit("_", 1)[0] for k in blob.files}:
        idx = int(key)
        out[idx] = (
            FixedTensor(blob[f"{key}_w"], cfg),
            FixedTensor(blob[f"{key}_b"], cfg),
        )
    return out


def _save_model(path, result):
    tensors = {}
    for idx, (w, b) in result.client_params.items():
        tensors[f"{idx}_w"] = w.data
        tensors[f"{idx}_b"] = b.data
    for idx, (w, b) in result.reconstructed_server_params().items():
        tensors[f"{idx}_w"] = np.asarray(w)
        tensors[f"{idx}_b"] = np.asarray(b)
    np.savez(path, **tensors)


def _run_local(args, session, train, test) -> RunReport:
    initial = _load_model(args.load_model, session.fixed) if args.load_model else None
    result = run_training(session, train, test, initial_params=initial)
    if args.save_model:
        _save_model(args.save_model, result)
    return RunReport.from_result(result, args.dataset)


def cmd_train(args) -> int:
    session = build_session(args)
    if args.role != "all":
        return _run_distributed_role(args, session)
    train, test = load_datasets(args, session.fixed)
    report = _run_local(args, session, train, test)
    _emit(args, [report])
    return 0


def cmd_eval(args) -> int:
    args.epochs = 0
    session = build_session(args)
    train, test = load_datasets(args, session.fixed)
    report = _run_local(args, session, train, test)
    _emit(args, [report])
    return 0


def cmd_bench(args) -> int:
    """Mode x network comparison matrix on one dataset config."""
    reports = []
    for network in ("1", "2"):
        for mode in MODES:
            session = build_session(args, mode=mode, network=network)
            train, test = load_datasets(args, session.fixed)
            reports.append(
                RunReport.from_result(
                    run_training(session, train, test), args.dataset
                )
            )
            print(f"done: network{network} {mode}", file=sys.stderr)
    _emit(args, reports)
    return 0


def cmd_audit_mask(args) -> int:
    rep = audit_mask_uniformity(samples=args.samples, seed=args.seed)
    doc = {
        "samples": rep.samples,
        "chi_square": rep.statistics,
        "p_values": rep.p_values,
        "two_sample_p": rep.two_sample_p,
        "uniform": rep.all_uniform,
    }
    print(json.dumps(doc, indent=2))
    return 0 if rep.all_uniform and rep.two_sample_p > 0.001 else 1


def cmd_audit_lia(args) -> int:
    rep = audit_lia_game(trials=args.trials, classes=args.classes, seed=args.seed)
    doc = {
        "trials": rep.trials,
        "classes": rep.classes,
        "plain_gradient_accuracy": rep.plain_accuracy,
        "share_accuracy": rep.share_accuracy,
        "chance": rep.chance,
        "share_std_error": rep.share_std_error,
        "share_at_chance": rep.share_within_3_sigma_of_chance,
    }
    print(json.dumps(doc, indent=2))
    return 0 if rep.share_within_3_sigma_of_chance else 1


def _emit(args, reports):
    if args.report:
        write_report(args.report, reports, args.format)
    print(reports_to_csv(reports), end="")


def _parse_endpoint(text):
    host, port = text.rsplit(":", 1)
    return host or "127.0.0.1", int(port)


def _run_distributed_role(args, session) -> int:
    """Run one role over TCP.  Listening side accepts all inbound pairs;
    connecting side dials role=host:port endpoints."""
    role = args.role
    connects = dict(item.split("=", 1) for item in (args.connect or []))
    counters = PhaseCounters(role)
    inbound = {
        "p0": ["client", "p1", "dealer"],
        "p1": ["client", "dealer"],
        "dealer": ["client"],
        "client": [],
    }[role]
    if session.mode.n_servers < 2:
        inbound = [p for p in inbound if p in ("client",)]
    channels = {}
    server_sock = None
    if inbound:
        if not args.listen:
            sys.exit(f"role {role} needs --listen")
        host, port = _parse_endpoint(args.listen)
        server_sock = tcp_listen(host, port)
        for _ in inbound:
            ch = tcp_accept(server_sock, role, counters, timeout=120)
            channels[ch.peer_role] = ch
    for peer, endpoint in connects.items():
        host, port = _parse_endpoint(endpoint)
        channels[peer] = tcp_connect(host, port, role, peer, counters, timeout=120)

    if role == "client":
        train, test = load_datasets(args, session.fixed)
        client = ClientRole(session, train, test, channels)
        out = client.run()
        acc = out["accuracy"]
        print(f"accuracy: {acc if acc is None else round(acc, 2)}")
    elif role == "dealer":
        DealerRole(session, channels["client"], channels["p0"], channels["p1"]).run()
    elif session.mode.private:
        party = 0 if role == "p0" else 1
        peer = "p1" if role == "p0" else "p0"
        PrivateServerRole(party, session, channels["client"], channels["dealer"], channels[peer]).run()
    else:
        PublicServerRole(session, channels["client"]).run()
    for ch in channels.values():
        ch.close()
    if server_sock is not None:
        server_sock.close()
    print(json.dumps({"role": role, "counters": counters.snapshot()}, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="splitfss",
        description="U-shaped split learning over two non-colluding servers "
        "with FSS comparison gates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train once and report")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="inference-only run (load a model to score it)")
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="run the mode x network matrix")
    _add_common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_mask = sub.add_parser("audit-mask", help="chi-square uniformity of masked inputs")
    p_mask.add_argument("--samples", type=int, default=100_000)
    p_mask.add_argument("--seed", type=int, default=0)
    p_mask.set_defaults(func=cmd_audit_mask)

    p_lia = sub.add_parser("audit-lia", help="label-inference game on gradients vs shares")
    p_lia.add_argument("--trials", type=int, default=5000)
    p_lia.add_argument("--classes", type=int, default=10)
    p_lia.add_argument("--seed", type=int, default=0)
    p_lia.set_defaults(func=cmd_audit_lia)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
