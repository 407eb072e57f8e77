"""``propgraph`` command line: gen | analyze | bounds | simulate | rewire | verify | report.

Exit codes: 0 success, 2 usage, 3 invalid input (including I/O), 4 analysis
refused (e.g. disconnected graph, Cheeger enumeration too large), 5 internal.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from . import graph as G
from .bounds import BoundSpec, cumulative_bound, dominates, layerwise_bound, power_bound, width_bound
from .curvature import forman_curvature_map
from .diagnostics import (TraceSeries, contraction_factor, diameter_ratio, last_token_collapse,
                          oversmoothing_curve, runway_profile, sink_report, underreaching_check)
from .models import ConfigError, ModelConfig, forward, init_model, lipschitz_constants, sensitivity_matrix
from .report import Bundle, atomic_write, compare_bundles, load_manifest
from .rewiring import RewireError, RewirePlan, rewire_greedy
from .spectral import (SpectralError, cheeger_cut, effective_resistance_matrix,
                       laplacian_spectrum)

log = logging.getLogger("propgraph")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_REFUSED, EXIT_INTERNAL = 0, 2, 3, 4, 5
DIAGS = ("last_token_collapse", "sink", "oversmoothing", "runway", "underreaching", "contraction")


class InputError(Exception):
    pass


def _matrix_csv(title: str, m: np.ndarray) -> str:
    lines = [f"# {title}", ",".join(["row"] + [str(j) for j in range(m.shape[1])])]
    lines += [",".join([str(i)] + [repr(float(x)) for x in row]) for i, row in enumerate(m)]
    return "\n".join(lines) + "\n"


def _load_graph(path: str) -> G.Graph:
    try:
        return G.load_graph(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except G.GraphError as exc:
        raise InputError(f"{path}: {exc}") from None


def _parse_range(text: str) -> list[int]:
    """``"2..64"`` -> powers of two from 2 to 64 when both ends are powers of two, else every integer."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            if lo > 0 and lo & (lo - 1) == 0 and hi & (hi - 1) == 0:
                out, x = [], lo
                while x <= hi:
                    out.append(x)
                    x *= 2
                return out
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"bad range {text!r}; use 'lo..hi' or 'a,b,c'") from None


def _finish(args, bundle: Bundle) -> None:
    bundle.argv = getattr(args, "replay_argv", None)
    manifest = bundle.write(args.out_dir)
    print(f"wrote {len(manifest['files']) + 1} files to {args.out_dir}")


def _graph_params(args) -> dict:
    return {k: getattr(args, k) for k in ("n", "m", "rows", "cols", "d") if getattr(args, k, None) is not None}


# subcommands ----------------------------------------------------------


def cmd_gen(args) -> int:
    params = _graph_params(args)
    if args.family == "random_regular":
        params["seed"] = args.seed
    try:
        g = G.generate(args.family, **params)
    except G.GraphError as exc:
        raise InputError(str(exc)) from None
    text = g.to_json() + "\n" if args.format == "json" else g.to_edgelist()
    header = f"# generated by propgraph {__version__}: {g.name}\n"
    if args.format != "json":
        text = header + text
    out = args.out or os.path.join(args.out_dir, f"{args.family}.{'json' if args.format == 'json' else 'edgelist'}")
    atomic_write(out, text)
    if args.format == "both":
        atomic_write(os.path.splitext(out)[0] + ".json", g.to_json() + "\n")
    kind = "arcs" if g.directed else "edges"
    print(f"{g.name}: n={g.n}, {g.num_edges} {kind} -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    g = _load_graph(args.graph)
    sel = {k: getattr(args, k) for k in ("spectral", "curvature", "resistance", "cheeger_exact")}
    if not any(sel.values()):
        sel = dict.fromkeys(sel, True)
    bundle = Bundle("analyze", {"graph": g.to_dict(), "sections": sorted(k for k, v in sel.items() if v),
                                "laplacian": args.laplacian}, args.seed, args.format)
    refused = []
    tol = args.tol if args.tol is not None else 1e-9
    if sel["spectral"] or sel["cheeger_exact"]:
        try:
            summary = laplacian_spectrum(g, args.laplacian)
            section = summary.to_dict()
            if sel["cheeger_exact"]:
                cut = cheeger_cut(g)
                section["cheeger_exact"] = {"value": float(cut.value),
                                            "fraction": f"{cut.value.numerator}/{cut.value.denominator}",
                                            "subset": sorted(cut.subset)}
                h = float(cut.value)
                section["cheeger_bounds"] = [h * h / 2, 2 * h]
                if args.laplacian == "normalized":
                    holds = h * h / 2 - tol <= summary.spectral_gap <= 2 * h + tol
                    section["cheeger_inequality"] = "PASS" if holds else "FAIL"
            bundle.add("spectral", section)
            bundle.add_csv("spectrum", "\n".join(
                [f"# laplacian_spectrum kind={args.laplacian}", "index,eigenvalue"]
                + [f"{i},{v!r}" for i, v in enumerate(summary.eigenvalues)]) + "\n")
        except SpectralError as exc:  # disconnected, directed or too large for exact Cheeger
            refused.append(str(exc))
            bundle.add("spectral", {"verdict": "REFUSED", "error": str(exc)})
    if sel["curvature"]:
        try:
            cm = forman_curvature_map(g)
            bundle.add("curvature", cm.to_dict())
            bundle.add_csv("curvature", cm.to_csv())
        except G.GraphError as exc:
            refused.append(str(exc))
            bundle.add("curvature", {"verdict": "REFUSED", "error": str(exc)})
    if sel["resistance"]:
        try:
            rm = effective_resistance_matrix(g)
            edge_r = {e: rm[e] for e in g.edges}
            worst = max(edge_r, key=lambda e: (edge_r[e], [-x for x in e])) if edge_r else None
            bundle.add("resistance", {
                **rm.to_dict(), "total": rm.total(), "max_pair": rm.max_pair(),
                "max_resistance_edge": list(worst) if worst else None,
                "commute_time_factor_2m": 2 * rm.edge_count})
            bundle.add_csv("resistance", _matrix_csv("effective_resistance_matrix", rm.values))
        except SpectralError as exc:
            refused.append(str(exc))
            bundle.add("resistance", {"verdict": "REFUSED", "error": str(exc)})
    _finish(args, bundle)
    for msg in refused:
        print(f"refused: {msg}", file=sys.stderr)
    _summary(bundle)
    return EXIT_REFUSED if refused else EXIT_OK


def _summary(bundle: Bundle) -> None:
    s = bundle.sections
    if "spectral" in s and "spectral_gap" in s["spectral"]:
        sp = s["spectral"]
        line = f"spectral gap ({sp['laplacian_kind']}): {sp['spectral_gap']:.12g}"
        if sp.get("cheeger_exact"):
            line += f"; cheeger h = {sp['cheeger_exact']['fraction']}; inequality {sp.get('cheeger_inequality')}"
        print(line)
    if "curvature" in s and "min_edge" in s["curvature"]:
        print(f"curvature minimum: edge {tuple(s['curvature']['min_edge'])} = {s['curvature']['min_value']}")
    if "resistance" in s and "max_resistance_edge" in s["resistance"]:
        print(f"max-resistance edge: {tuple(s['resistance']['max_resistance_edge'])}; "
              f"total resistance {s['resistance']['total']:.12g}")


def _model_config(args) -> ModelConfig:
    if getattr(args, "config", None):
        try:
            return ModelConfig.from_json(args.config)
        except OSError as exc:
            raise InputError(f"cannot read {args.config}: {exc.strerror}") from None
    arch = args.arch
    tf = arch == "transformer"
    kw = dict(arch=arch, layers=args.layers, dim=args.dim, seed=args.seed, heads=args.heads,
              linear_mode=args.linear)
    if tf:
        kw.update(causal=args.causal, residual=args.residual, uniform_attention=args.uniform,
                  differential_lambda=args.differential_lambda, pause_tokens=args.pause,
                  pause_placement=args.pause_placement, sink_token=args.sink, mlp=args.mlp,
                  layernorm=args.layernorm)
    if arch == "gin":
        kw["gin_epsilon"] = args.gin_epsilon
    return ModelConfig(**kw)


def cmd_bounds(args) -> int:
    g = _load_graph(args.graph)
    try:
        cfg = ModelConfig.from_json(args.config)
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc.strerror}") from None
    if cfg.arch == "transformer":
        raise InputError("bounds needs a graph model (mean_gnn, gin or gat)")
    depth = cfg.layers if args.depth is None else args.depth
    span = args.span
    if not 1 <= depth <= cfg.layers:
        raise InputError(f"--depth must be between 1 and the model depth {cfg.layers}")
    if not 1 <= span <= depth:
        raise InputError("--span must be between 1 and --depth")
    model = init_model(cfg)
    spec, certified = lipschitz_constants(model, g)
    overrides = {k: getattr(args, k) for k in ("alpha", "beta") if getattr(args, k) is not None}
    spec = BoundSpec(**{**spec.to_dict(), **overrides})
    if args.alpha_scale != 1.0:
        spec = BoundSpec(**{**spec.to_dict(), "alpha": spec.alpha * args.alpha_scale})
    # bounds count walks on the graph the model actually aggregates over
    agg = g.with_self_loops() if cfg.arch in ("mean_gnn", "gin") else g
    X = np.random.default_rng(args.seed).standard_normal((g.n, cfg.dim))
    slack = args.tol if args.tol is not None else 1e-8
    r0 = depth - span
    emp_in = sensitivity_matrix(model, g, X, 0, depth)
    emp_span = emp_in if r0 == 0 else sensitivity_matrix(model, g, X, r0, depth)
    mats = [(power_bound(agg, spec, depth), emp_in), (cumulative_bound(agg, spec, depth), emp_in),
            (layerwise_bound(agg, spec, r0, span), emp_span)]
    bundle = Bundle("bounds", {"graph": g.to_dict(), "config": cfg.to_dict(), "depth": depth, "span": span,
                               "alpha_scale": args.alpha_scale, "overrides": overrides, "slack": slack},
                    args.seed, args.format)
    label = "exact" if certified and cfg.linear_mode else "estimate"
    verdicts = {}
    for b, emp in mats:
        ok = dominates(b, emp, slack)
        verdicts[b.kind] = "PASS" if ok.all() else "FAIL"
        bundle.add(b.kind, {**b.to_dict(), "dominance": ok.astype(int).tolist(), "verdict": verdicts[b.kind]})
        bundle.add_csv(b.kind, b.to_csv())
    wb = width_bound(agg, spec, depth)
    wok = dominates(wb, emp_in, slack)
    bundle.add("bound_width", {**wb.to_dict(), "dominance": wok.astype(int).tolist(),
                               "verdict": "PASS" if wok.all() else "FAIL", "in_overall_verdict": False})
    bundle.add_csv("bound_width", wb.to_csv())
    bundle.add("empirical", {"from_input": emp_in.tolist(), "span": emp_span.tolist(),
                             "measure": "spectral norm of the finite-difference Jacobian block",
                             "layer_spans": [[0, depth], [r0, depth]]})
    bundle.add_csv("empirical", _matrix_csv(f"empirical layer_span=0..{depth}", emp_in))
    overall = "PASS" if all(v == "PASS" for v in verdicts.values()) else "FAIL"
    bundle.add("verdict", {"overall": overall, "per_bound": verdicts, "label": label,
                           "spec": spec.to_dict(), "aggregation_self_loops": agg.self_loops})
    _finish(args, bundle)
    print(f"dominance ({label}): {overall}  " + "  ".join(f"{k}={v}" for k, v in verdicts.items()))
    return EXIT_OK


def _sim_graph(args, cfg: ModelConfig):
    if cfg.arch == "transformer":
        return None
    if args.graph:
        return _load_graph(args.graph)
    params = _graph_params(args)
    if args.family == "random_regular":
        params["seed"] = args.seed
    try:
        return G.generate(args.family, **params)
    except G.GraphError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _model_config(args)
    diags = args.diag or ["oversmoothing"]
    for d in diags:
        if d not in DIAGS:
            raise InputError(f"invalid diag {d!r}; choose from {', '.join(DIAGS)}")
    g = _sim_graph(args, cfg)
    n = g.n if g is not None else (args.n or 8)
    sweep_kind, sweep_vals = (args.sweep[0], _parse_range(args.sweep[1])) if args.sweep else (None, None)
    if sweep_kind not in (None, "lengths", "layers"):
        raise InputError("--sweep kind must be 'lengths' or 'layers'")
    model = init_model(cfg)
    rng = np.random.default_rng(args.seed)
    X = rng.standard_normal((n, cfg.dim))
    bundle = Bundle("simulate", {"config": cfg.to_dict(), "graph": None if g is None else g.to_dict(),
                                 "n": n, "diags": diags, "sweep": args.sweep}, args.seed, args.format)
    for d in diags:
        if d == "last_token_collapse":
            if sweep_kind == "layers":
                vals = []
                for L in sweep_vals:
                    s = last_token_collapse(ModelConfig(**{**cfg.to_dict(), "layers": L}), [n], seed=args.seed)
                    vals.append(s.values[0])
                series = TraceSeries("last_token_collapse", tuple(sweep_vals), tuple(vals), {},
                                     {"n": n, "cfg": cfg.config_hash()})
                xname = "layers"
            else:
                series = last_token_collapse(cfg, sweep_vals or [n], seed=args.seed)
                xname = "n"
            bundle.add(d, series.to_dict())
            bundle.add_csv(d, series.to_csv(xname))
        elif d == "sink":
            trace = forward(model, g, X)
            rep = sink_report(trace, threshold=args.sink_threshold)
            bundle.add(d, rep.to_dict())
            bundle.add_csv(d, "\n".join([f"# sink_report n={n} threshold={args.sink_threshold}",
                                         "position,role,mean_mass,baseline"]
                                        + [f"{i + 1},{r},{m!r},{b!r}" for i, (r, m, b) in
                                           enumerate(zip(rep.roles, rep.mean_mass.tolist(),
                                                         rep.baseline.tolist()))]) + "\n")
            print(f"sink: position-1 mass {rep.sink_score:.12g} (ratio {rep.sink_ratio:.3g}, "
                  f"flagged={rep.flagged})")
        elif d == "oversmoothing":
            curve = oversmoothing_curve(forward(model, g, X), g)
            bundle.add(d, curve.to_dict())
            bundle.add_csv(d, curve.to_csv("layer"))
            print(f"oversmoothing: energy {curve.values[0]:.6g} -> {curve.values[-1]:.6g}")
        elif d == "runway":
            cg = G.causal(n)
            prof = runway_profile(cg, cfg.layers)
            bundle.add(d, prof.to_dict())
            bundle.add_csv(d, prof.to_csv())
        elif d == "underreaching":
            bad = underreaching_check(model, g, cfg.layers, X=X)
            bundle.add(d, {"violations": [vars(v) for v in bad], "L": cfg.layers})
            print(f"underreaching: {len(bad)} violations")
        elif d == "contraction":
            trace = forward(model, g, X)
            rows = []
            for l, att in enumerate(trace.attention):
                if att is None:
                    continue
                for h in range(att.shape[0]):
                    if cfg.differential_lambda:
                        continue
                    rows.append({"layer": l + 1, "head": h, "factor": contraction_factor(att[h]),
                                 "measured_ratio": diameter_ratio(att[h], trace.values[l][h])})
            bundle.add(d, rows)
            bundle.add_csv(d, "\n".join(["# contraction_factor per attention map", "layer,head,factor,measured_ratio"]
                                        + [f"{r['layer']},{r['head']},{r['factor']!r},{r['measured_ratio']!r}"
                                           for r in rows]) + "\n")
    _finish(args, bundle)
    return EXIT_OK


def cmd_rewire(args) -> int:
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                plan = RewirePlan.from_dict(json.load(fh))
        except OSError as exc:
            raise InputError(f"cannot read {args.replay}: {exc.strerror}") from None
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"malformed plan: {exc}") from None
        base = _load_graph(args.graph) if args.graph else plan.base
    else:
        if not args.graph:
            raise InputError("rewire needs a graph file (or --replay PLAN)")
        base = _load_graph(args.graph)
        try:
            plan = rewire_greedy(base, args.objective, args.budget, variant=args.variant,
                                 allow_delete=args.allow_delete)
        except RewireError as exc:
            raise InputError(str(exc)) from None
    rewired = plan.apply(base)
    bundle = Bundle("rewire", {"graph": base.to_dict(), "objective": plan.objective, "budget": plan.budget,
                               "variant": plan.variant, "replay": bool(args.replay)}, args.seed, args.format)
    bundle.add("plan", plan.to_dict())
    bundle.add("rewired", rewired.to_dict())
    bundle.add_file("plan.json", plan.to_json() + "\n")
    bundle.add_file("rewired.edgelist", rewired.to_edgelist())
    bundle.add_csv("objective", "\n".join(
        [f"# rewire objective={plan.objective} budget={plan.budget}", "step,action,u,v,before,after"]
        + [f"{i + 1},{s.action},{s.edge[0]},{s.edge[1]},{s.before!r},{s.after!r}"
           for i, s in enumerate(plan.steps)]) + "\n")
    _finish(args, bundle)
    for s in plan.steps:
        print(f"{s.action} {s.edge}: {s.before:.12g} -> {s.after:.12g}")
    if not plan.steps:
        print("empty plan")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import CHECKS, run_all
    numbers = args.only or [n for n, *_ in CHECKS]
    results = run_all(seed=args.seed, numbers=numbers, repro=not args.no_repro, out_dir=args.out_dir,
                      fmt=args.format, argv=args.replay_argv)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else 1


def cmd_report(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest: {exc}") from None
    src = args.manifest if os.path.isdir(args.manifest) else os.path.dirname(os.path.abspath(args.manifest))
    print(f"bundle: {manifest['command']} (propgraph {manifest['version']}, backend {manifest['backend']}, "
          f"seed {manifest['seed']}, created {manifest.get('created')})")
    for name in manifest["files"]:
        print(f"  {name}")
    if not args.regenerate:
        return EXIT_OK
    argv = manifest.get("argv")
    if not argv:
        raise InputError("manifest records no command line to regenerate from")
    if os.path.abspath(args.out_dir) == os.path.abspath(src):
        raise InputError("--out-dir must differ from the bundle being regenerated")
    code = main(list(argv) + ["--out-dir", args.out_dir])
    if code not in (EXIT_OK, EXIT_REFUSED, 1):
        return code
    diffs = compare_bundles(src, args.out_dir)
    print("regenerated bundle is byte-identical" if not diffs else f"differs: {', '.join(diffs)}")
    return EXIT_OK if not diffs else 1


def _replay_argv(argv: list[str]) -> list[str]:
    """``argv`` without any ``--out-dir`` so the run can be redirected."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
        elif tok == "--out-dir":
            skip = True
        elif not tok.startswith("--out-dir="):
            out.append(tok)
    return out


# parser ---------------------------------------------------------------


def _common(default: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    sup = {} if default else {"default": argparse.SUPPRESS}
    p.add_argument("--seed", type=int, **({"default": 0} if default else sup))
    p.add_argument("--out-dir", **({"default": os.environ.get("PROPGRAPH_OUT_DIR", "propgraph-out")}
                                   if default else sup))
    p.add_argument("--format", choices=("json", "csv", "both"), **({"default": "both"} if default else sup))
    p.add_argument("--tol", type=float, **({"default": None} if default else sup),
                   help="override the comparison tolerance of the command")
    p.add_argument("-v", "--verbose", action="store_true", **({} if default else sup))
    return p


def _graph_size_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, help="clique size for barbell")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--d", type=int, help="degree for random_regular")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="propgraph", parents=[_common(True)],
                                     description="Information-propagation diagnostics and rewiring.")
    parser.add_argument("--version", action="version", version=f"propgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(False)

    p = sub.add_parser("gen", parents=[common], help="generate a canonical graph")
    p.add_argument("--family", required=True, choices=G.FAMILIES)
    _graph_size_args(p)
    p.add_argument("--out", help="output path (default <out-dir>/<family>.edgelist)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", parents=[common], help="spectral / curvature / resistance analysis")
    p.add_argument("graph")
    p.add_argument("--spectral", action="store_true")
    p.add_argument("--curvature", action="store_true")
    p.add_argument("--resistance", action="store_true")
    p.add_argument("--cheeger-exact", action="store_true")
    p.add_argument("--laplacian", choices=("normalized", "combinatorial"), default="normalized")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bounds", parents=[common], help="Jacobian bounds vs finite-difference sensitivity")
    p.add_argument("graph")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--depth", type=int, help="layers from the input (default: model depth)")
    p.add_argument("--span", type=int, default=1, help="layer span L of the layerwise bound")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha-scale", type=float, default=1.0, help="scale alpha (0.5 = negative control)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", parents=[common], help="run reference models and diagnostics")
    p.add_argument("--config", help="model config JSON (overrides the model flags)")
    p.add_argument("--arch", choices=("mean_gnn", "gat", "gin", "transformer"), default="transformer")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--causal", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--residual", action="store_true")
    p.add_argument("--layernorm", action="store_true")
    p.add_argument("--mlp", action="store_true")
    p.add_argument("--uniform", action="store_true", help="forced-uniform attention (W_Q = W_K = 0)")
    p.add_argument("--linear", action="store_true", help="identity activations")
    p.add_argument("--differential-lambda", type=float)
    p.add_argument("--pause", type=int, default=0)
    p.add_argument("--pause-placement", choices=("prepend", "append"), default="append")
    p.add_argument("--sink", action="store_true", help="prepend a dedicated sink placeholder")
    p.add_argument("--gin-epsilon", type=float, default=0.0)
    p.add_argument("--graph", help="graph file for graph models")
    p.add_argument("--family", choices=G.FAMILIES, default="barbell")
    _graph_size_args(p)
    p.add_argument("--sweep", nargs=2, metavar=("KIND", "RANGE"), help="lengths|layers and lo..hi")
    p.add_argument("--diag", action="append", help=f"one of {', '.join(DIAGS)} (repeatable)")
    p.add_argument("--sink-threshold", type=float, default=3.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rewire", parents=[common], help="greedy rewiring or plan replay")
    p.add_argument("graph", nargs="?")
    p.add_argument("--objective", choices=("spectral_gap", "curvature", "resistance"), default="spectral_gap")
    p.add_argument("--budget", type=int, default=1)
    p.add_argument("--variant", choices=("total", "max"), default="total")
    p.add_argument("--allow-delete", action="store_true")
    p.add_argument("--replay", help="replay a plan JSON instead of planning")
    p.set_defaults(func=cmd_rewire)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", type=int, action="append", help="run only this criterion (repeatable)")
    p.add_argument("--no-repro", action="store_true", help="skip the second run (criterion 10)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", parents=[common], help="inspect or regenerate a bundle from its manifest")
    p.add_argument("manifest", help="bundle directory or manifest.json")
    p.add_argument("--regenerate", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.replay_argv = _replay_argv(argv)
    if args.command in ("gen", "simulate") and args.family == "barbell" and args.m is None:
        # barbell is sized by its clique size; accept --n as a synonym, default 4 for simulate
        args.m = args.n if args.n is not None else (4 if args.command == "simulate" else None)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError, G.GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SpectralError, RewireError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
