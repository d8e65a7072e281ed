"""Command-line entry points.

Exit codes: 0 success, 1 usage problems, 2 data errors (malformed
documents, failed validation, undefined metrics).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import metrics, session_io, simlab
from .evolution import GAConfig, run_session
from .rig import RigError
from .synth import RigGenParams, generate_synthetic_rig

USAGE_EXIT = 1
DATA_EXIT = 2

DATA_ERRORS = (session_io.SchemaError, RigError, metrics.MetricUndefinedError,
               simlab.GmmDegenerateError, ValueError, OSError)


def _load_rig(path):
    if path:
        return session_io.read_rig(path)
    return generate_synthetic_rig(RigGenParams())


def _resolve_target(rig, spec: str) -> np.ndarray:
    """Desk target name (t1/t3/t6a/t6b/t12/dense) or a JSON file with a weight list."""
    targets = None
    if spec in ("t1", "t3", "t6a", "t6b", "t12", "dense"):
        targets = simlab.make_desk_targets(rig)
        return targets[spec]
    with open(spec) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("weights", data.get("target"))
    arr = np.asarray(data, dtype=float)
    if arr.shape != (rig.n_shapes,):
        raise ValueError(f"target length {arr.shape} does not match rig ({rig.n_shapes})")
    return arr


def _sim_config(rig, args, pressure: bool = False) -> simlab.SimConfig:
    return simlab.SimConfig(
        target=_resolve_target(rig, args.target),
        target_name=args.target,
        metric=args.metric,
        repetitions=args.reps,
        generations=args.generations,
        init_activation_range=tuple(args.activation),
        seed=args.seed,
        pressure_mode="ranked" if pressure else "default",
    )


# -- subcommand handlers ---------------------------------------------------------

def cmd_rig_gen(args) -> int:
    params = RigGenParams(seed=args.seed, k_core=args.cores)
    rig = generate_synthetic_rig(params)
    session_io.write_rig(rig, args.out)
    print(f"wrote rig {rig.rig_id}: {rig.n_vertices} vertices, "
          f"{len(rig.faces)} faces, {rig.n_shapes} shapes -> {args.out}")
    return 0


def cmd_rig_validate(args) -> int:
    rig = session_io.read_rig(args.path)
    print(f"rig {rig.rig_id} is valid: {rig.n_vertices} vertices, "
          f"{rig.n_shapes} shapes ({len(rig.unique_core_indices)} unique cores)")
    return 0


def cmd_run(args) -> int:
    cfg_doc = session_io.read_run_config(args.config)
    ga: GAConfig = cfg_doc["ga"]
    if cfg_doc["rig_path"]:
        rig = session_io.read_rig(cfg_doc["rig_path"])
    elif cfg_doc["rig_gen_params"]:
        rig = generate_synthetic_rig(RigGenParams.from_dict(cfg_doc["rig_gen_params"]))
    else:
        rig = generate_synthetic_rig(RigGenParams())
    auto = cfg_doc["auto"]
    if not auto:
        raise ValueError("run config needs an 'auto' section (target + metric) "
                         "for a headless session")
    target = _resolve_target(rig, auto.get("target_name") or auto.get("target"))
    ctx = simlab.MetricContext(rig, auto.get("metric", "CD"))
    counts = simlab.default_schedule(ga.generations)

    def selector(pop, gen, _rig):
        return simlab.auto_select(pop, target, ctx, counts[gen])

    fixed = None
    if cfg_doc["fixed_init_path"]:
        fixed = session_io.read_fixed_init(cfg_doc["fixed_init_path"])
    log = run_session(rig, ga, selector, fixed_members=fixed)
    session_io.write_log(log, args.out)
    state = f"aborted: {log.abort}" if log.abort else "finished"
    print(f"session {state}; {len(log.populations)} generations -> {args.out}")
    return 0 if log.abort is None else DATA_EXIT


def cmd_replay(args) -> int:
    log = session_io.read_log(args.log)
    if args.rig:
        rig = session_io.read_rig(args.rig)
    elif log.rig_gen_params:
        rig = generate_synthetic_rig(RigGenParams.from_dict(log.rig_gen_params))
    else:
        raise ValueError("log carries no rig recipe; pass --rig")
    if rig.rig_id != log.rig_id:
        raise ValueError(f"rig {rig.rig_id!r} does not match log rig {log.rig_id!r}")
    replayed = session_io.replay_from_log(rig, log)
    for a, b in zip(log.populations, replayed.populations):
        if not np.array_equal(a.members, b.members):
            print(f"replay DIVERGED at generation {a.generation}", file=sys.stderr)
            return DATA_EXIT
    if args.out:
        session_io.write_log(replayed, args.out)
    print(f"replay matches the log across {len(log.populations)} generations")
    return 0


def cmd_simulate(args, pressure: bool = False) -> int:
    rig = _load_rig(args.rig)
    sim = _sim_config(rig, args, pressure=pressure)
    stats = simlab.run_simulation(rig, sim)
    label = "pressure study" if pressure else "simulation"
    print(f"{label}: {stats.repetitions_ok}/{sim.repetitions} repetitions ok; "
          f"mu0 {stats.mu[0]:.4f} -> mu{stats.generations} {stats.final_mu:.4f} "
          f"(sigma {stats.final_sigma:.4f})")
    if stats.failed:
        for rep, reason in stats.failed[:5]:
            print(f"  repetition {rep} failed: {reason}", file=sys.stderr)
    if args.out:
        session_io.write_stats(stats, args.out, sim=sim)
    if args.csv:
        session_io.export_csv(stats, args.csv)
    return 0


def cmd_pressure(args) -> int:
    return cmd_simulate(args, pressure=True)


def cmd_kl(args) -> int:
    stats, _ = session_io.read_stats(args.stats)
    series = simlab.kl_series(stats)
    for g, v in enumerate(series):
        print(f"gen {g} -> {g + 1}: KL {v:.6f}")
    if args.csv:
        session_io.export_table_csv(
            [{"step": g, "kl": float(v)} for g, v in enumerate(series)], args.csv)
    return 0


def cmd_analyze_gmm(args) -> int:
    rig = _load_rig(args.rig)
    named = {}
    for path in args.stats:
        stats, _ = session_io.read_stats(path)
        name = stats.target_name or os.path.basename(path)
        named[name] = np.stack([rig.reduce_weights(w) for w in stats.final_elites])
    union = np.vstack(list(named.values()))
    model = metrics.fit_pca(union, args.variance_target)
    proj = {n: np.stack([metrics.project(model, w) for w in r]) for n, r in named.items()}
    gmm = simlab.fit_gmm(np.vstack(list(proj.values())), k=len(named),
                         rng=np.random.default_rng(args.seed), shrinkage=args.shrinkage)
    res = simlab.separability_table(proj, gmm)
    header = "target".ljust(12) + "".join(c.ljust(12) for c in res.col_labels)
    print(header)
    for name, row in zip(res.row_labels, res.counts):
        print(name.ljust(12) + "".join(str(int(v)).ljust(12) for v in row))
    print(f"diagonal fraction: {res.diagonal_fraction:.4f}")
    if args.out:
        rows = []
        for name, row in zip(res.row_labels, res.counts):
            entry = {"target": name}
            entry.update({c: int(v) for c, v in zip(res.col_labels, row)})
            rows.append(entry)
        session_io.export_table_csv(rows, args.out)
    return 0


def cmd_bias(args) -> int:
    rig = _load_rig(args.rig)
    target = _resolve_target(rig, args.target)
    cfg = GAConfig(init_mode="fixed" if args.fixed else "protocol",
                   init_activation_range=tuple(args.activation))
    fixed = session_io.read_fixed_init(args.fixed) if args.fixed else None
    value = simlab.mean_target_bias(rig, cfg, target, args.reps, seed=args.seed,
                                    fixed_members=fixed)
    print(f"target bias (mean initial-elite CD over {args.reps} repetitions): {value:.4f}")
    return 0


def cmd_activation_study(args) -> int:
    rig = _load_rig(args.rig)
    targets = {name: _resolve_target(rig, name) for name in args.targets}
    rows = simlab.activation_study(rig, targets, repetitions=args.reps,
                                   generations=args.generations, seed=args.seed)
    for row in rows:
        print(f"target {row['target']:>6} range {str(row['range']):>8}: "
              f"mu0 {row['mu0']:.4f} sigma0 {row['sigma0']:.4f} "
              f"muG {row['muG']:.4f} sigmaG {row['sigmaG']:.4f}")
    if args.out:
        session_io.export_table_csv(
            [{**r, "range": f"{r['range'][0]}-{r['range'][1]}"} for r in rows], args.out)
    return 0


def cmd_heatmap(args) -> int:
    rig = _load_rig(args.rig)
    log = session_io.read_log(args.log)
    if log.final_elite is None:
        raise ValueError("log has no final elite (aborted session?)")
    target = _resolve_target(rig, args.target)
    mesh = rig.evaluate(log.final_elite)
    field = simlab.heatmap_field(mesh, rig.evaluate(target))
    session_io.export_heatmap(mesh, field, args.out, args.sidecar)
    print(f"heatmap: max {field.max():.4f}, rms {np.sqrt(np.mean(field ** 2)):.4f} "
          f"-> {args.out} + {args.sidecar}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host = args.bind or os.environ.get("EMOGEN_BIND", "127.0.0.1")
    port = args.port if args.port is not None else int(os.environ.get("EMOGEN_PORT", "8321"))
    uvicorn.run(create_app(), host=host, port=port)
    return 0


# -- parser ------------------------------------------------------------------------

def _add_common_sim_args(p, default_reps: int) -> None:
    p.add_argument("--rig", help="rig document path (default: built-in synthetic rig)")
    p.add_argument("--target", required=True,
                   help="desk target name (t1/t3/t6a/t6b/t12/dense) or JSON weight file")
    p.add_argument("--metric", default="CD", help="selection metric (default CD)")
    p.add_argument("--reps", type=int, default=default_reps)
    p.add_argument("--generations", type=int, default=10)
    p.add_argument("--activation", type=int, nargs=2, default=(3, 8),
                   metavar=("LO", "HI"), help="initial active-shape range")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="stats document output path")
    p.add_argument("--csv", help="per-repetition CSV output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emogen",
                                     description="Evolve facial expressions on a blendshape rig")
    sub = parser.add_subparsers(dest="command", required=True)

    rig = sub.add_parser("rig", help="rig tools").add_subparsers(dest="rig_command",
                                                                 required=True)
    g = rig.add_parser("gen", help="generate the synthetic rig")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--cores", type=int, default=22)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_rig_gen)
    v = rig.add_parser("validate", help="validate a rig document")
    v.add_argument("path")
    v.set_defaults(func=cmd_rig_validate)

    r = sub.add_parser("run", help="run one auto-selected session from a config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="re-run a logged session and compare")
    rp.add_argument("--log", required=True)
    rp.add_argument("--rig")
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_replay)

    sim = sub.add_parser("simulate", help="repeated auto-selected sessions")
    _add_common_sim_args(sim, default_reps=500)
    sim.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("pressure", help="ranked selection-pressure variant")
    _add_common_sim_args(pr, default_reps=50)
    pr.set_defaults(func=cmd_pressure)

    kl = sub.add_parser("kl", help="KL series of a stats document")
    kl.add_argument("--stats", required=True)
    kl.add_argument("--csv")
    kl.set_defaults(func=cmd_kl)

    gm = sub.add_parser("analyze-gmm", help="GMM separability over stats documents")
    gm.add_argument("--stats", nargs="+", required=True)
    gm.add_argument("--rig")
    gm.add_argument("--seed", type=int, default=0)
    gm.add_argument("--shrinkage", type=float, default=0.05)
    gm.add_argument("--variance-target", type=float, default=0.99)
    gm.add_argument("--out", help="CSV output path")
    gm.set_defaults(func=cmd_analyze_gmm)

    b = sub.add_parser("bias", help="mean initial-elite CD toward a target")
    b.add_argument("--rig")
    b.add_argument("--target", required=True)
    b.add_argument("--reps", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--activation", type=int, nargs=2, default=(3, 8), metavar=("LO", "HI"))
    b.add_argument("--fixed", help="fixedinit document; bias of that set instead")
    b.set_defaults(func=cmd_bias)

    ac = sub.add_parser("activation-study", help="bias/accuracy per activation range")
    ac.add_argument("--rig")
    ac.add_argument("--targets", nargs="+", default=["t1", "t3", "t12"])
    ac.add_argument("--reps", type=int, default=50)
    ac.add_argument("--generations", type=int, default=10)
    ac.add_argument("--seed", type=int, default=0)
    ac.add_argument("--out", help="CSV output path")
    ac.set_defaults(func=cmd_activation_study)

    hm = sub.add_parser("heatmap", help="per-vertex distance field of a final elite")
    hm.add_argument("--rig")
    hm.add_argument("--log", required=True)
    hm.add_argument("--target", required=True)
    hm.add_argument("--out", required=True, help="OBJ output path")
    hm.add_argument("--sidecar", required=True, help="per-vertex scalar output path")
    hm.set_defaults(func=cmd_heatmap)

    sv = sub.add_parser("serve", help="start the session HTTP service")
    sv.add_argument("--bind", help="bind address (or EMOGEN_BIND, default 127.0.0.1)")
    sv.add_argument("--port", type=int, help="port (or EMOGEN_PORT, default 8321)")
    sv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else USAGE_EXIT
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
