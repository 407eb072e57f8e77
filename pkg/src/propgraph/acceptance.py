"""Acceptance checks run by ``propgraph verify`` and the test suite.

Each check returns a :class:`CheckResult`; ``details`` holds only
deterministic data so bundles are reproducible, while wall time is kept
separately and compared against the per-check runtime budget.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import graph as G
from .bounds import BoundSpec, cumulative_bound, layerwise_bound, power_bound
from .diagnostics import (contraction_factor, diameter_ratio, last_token_collapse,
                          oversmoothing_curve, sink_report, underreaching_check)
from .models import (ModelConfig, forward, init_model, lipschitz_constants, sensitivity_matrix)
from .report import Bundle, compare_bundles
from .rewiring import rewire_greedy
from .spectral import (commute_time, commute_time_exact_markov,
                       commute_time_monte_carlo, effective_resistance_matrix, laplacian_spectrum)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = 0.0

    @property
    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.number:>2}. {self.name} ({self.seconds:.1f}s / {self.budget:.0f}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "details": self.details}


def canonical_graphs() -> list[G.Graph]:
    """Connected canonical generators at desk scale (n <= 12)."""
    gs = [G.path(n) for n in range(2, 9)]
    gs += [G.cycle(n) for n in range(3, 9)]
    gs += [G.complete(n) for n in range(2, 8)]
    gs += [G.barbell(m) for m in (3, 4, 5, 6)]
    gs += [G.grid(2, 2), G.grid(2, 3), G.grid(3, 3), G.grid(3, 4)]
    gs += [G.random_regular(8, 3, seed=0), G.random_regular(10, 3, seed=1), G.random_regular(12, 4, seed=2)]
    return [g for g in gs if g.is_connected()]


def random_connected_graphs(count: int, n_min: int, n_max: int, seed: int) -> list[G.Graph]:
    """Seeded Erdos-Renyi draws, keeping only connected ones until ``count`` are found."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(n_min, n_max + 1))
        p = float(rng.uniform(0.15, 0.9))
        iu = np.triu_indices(n, 1)
        keep = rng.random(len(iu[0])) < p
        g = G.build_graph(n, list(zip(iu[0][keep].tolist(), iu[1][keep].tolist())),
                          name=f"gnp(n={n},#{len(out)})")
        if g.is_connected():
            out.append(g)
    return out


# individual checks ----------------------------------------------------


def check_cheeger(seed: int = 0, tol: float = 1e-9) -> tuple[bool, dict]:
    graphs = random_connected_graphs(200, 2, 12, seed) + canonical_graphs()
    worst_lower, worst_upper, failures = np.inf, np.inf, []
    for g in graphs:
        s = laplacian_spectrum(g, "normalized", cheeger=True)
        lo, hi = s.cheeger_bounds
        worst_lower = min(worst_lower, s.spectral_gap - lo)
        worst_upper = min(worst_upper, hi - s.spectral_gap)
        if not s.cheeger_holds(tol):
            failures.append(g.name)
    k4 = laplacian_spectrum(G.complete(4), "normalized", cheeger=True)
    k4_ok = 2 * k4.cheeger_exact == Fraction(4, 3) and abs(k4.spectral_gap - 4 / 3) <= tol
    details = {"graphs": len(graphs), "failures": failures,
               "min_gap_minus_lower": float(worst_lower), "min_upper_minus_gap": float(worst_upper),
               "k4_two_h": str(2 * k4.cheeger_exact), "k4_gap": k4.spectral_gap}
    return not failures and k4_ok, details


def _max_resistance_pair(g: G.Graph) -> tuple[int, int]:
    r = effective_resistance_matrix(g).values
    u, v = np.unravel_index(np.argmax(r), r.shape)
    return (int(min(u, v)), int(max(u, v)))


def check_commute(seed: int = 0, walks: int = 100_000) -> tuple[bool, dict]:
    cases = [(G.path(3), (0, 2)), (G.complete(3), (0, 1)), (G.barbell(4), (0, 7)), (G.barbell(4), (3, 4))]
    cases += [(g, _max_resistance_pair(g)) for g in random_connected_graphs(20, 3, 10, seed + 1)]
    rows, ok = [], True
    for k, (g, (u, v)) in enumerate(cases):
        exact = commute_time(g, u, v)
        markov = commute_time_exact_markov(g, u, v)
        mc = commute_time_monte_carlo(g, u, v, walks=walks, seed=seed * 1000 + k)
        z = (mc.mean - exact) / mc.stderr
        markov_ok = abs(markov - exact) <= 1e-9 * max(1.0, exact)
        mc_ok = abs(z) <= 3.0
        ok &= markov_ok and mc_ok
        rows.append({"graph": g.name, "pair": [u, v], "two_m_R": exact, "markov": markov,
                     "monte_carlo": mc.mean, "stderr": mc.stderr, "z": z,
                     "markov_ok": markov_ok, "mc_ok": mc_ok})
    return ok, {"walks": walks, "cases": rows}


def bound_dominance(g: G.Graph, cfg: ModelConfig, max_depth: int, slack: float = 1e-8,
                    alpha_scale: float = 1.0, seed: int = 0) -> dict:
    """Compare the power, cumulative and layerwise bounds with finite-difference sensitivities."""
    model = init_model(cfg)
    agg = g.with_self_loops()
    spec, certified = lipschitz_constants(model, g)
    spec = BoundSpec(**{**spec.to_dict(), "alpha": spec.alpha * alpha_scale})
    X = np.random.default_rng([seed, g.n]).standard_normal((g.n, cfg.dim))
    worst = {"bound_power": np.inf, "bound_cumulative": np.inf, "bound_layerwise": np.inf}
    for r in range(max_depth):
        for stop in range(r + 1, max_depth + 1):
            emp = sensitivity_matrix(model, g, X, r, stop)
            bounds = [layerwise_bound(agg, spec, r, stop - r)]
            if r == 0:
                bounds += [power_bound(agg, spec, stop), cumulative_bound(agg, spec, stop)]
            for b in bounds:
                worst[b.kind] = min(worst[b.kind], float((b.values + slack - emp).min()))
    return {"graph": g.name, "alpha": spec.alpha, "beta": spec.beta, "certified": certified,
            "min_margin": worst, "dominates": all(v >= 0 for v in worst.values())}


def check_bounds(seed: int = 0, slack: float = 1e-8) -> tuple[bool, dict]:
    cfg = ModelConfig("mean_gnn", layers=4, dim=3, seed=seed, linear_mode=True)
    rows = [bound_dominance(g, cfg, 4, slack, seed=seed) for g in canonical_graphs() if g.n <= 10]
    control = bound_dominance(G.path(3), cfg, 4, slack, alpha_scale=0.5, seed=seed)
    ok = all(r["dominates"] for r in rows) and not control["dominates"]
    return ok, {"graphs": rows, "negative_control": {**control, "verdict": "FAIL" if not control["dominates"] else "PASS"}}


def check_underreaching(seed: int = 0) -> tuple[bool, dict]:
    rows, ok = [], True
    for g in (G.path(4), G.path(6), G.grid(3, 3), G.grid(3, 4)):
        diam = int(g.distance_matrix().max())
        for arch in ("mean_gnn", "gin", "gat"):
            for L in range(1, diam):
                model = init_model(ModelConfig(arch, layers=L, dim=3, seed=seed, linear_mode=True))
                bad = underreaching_check(model, g, L, seed=seed)
                ok &= not bad
                rows.append({"graph": g.name, "arch": arch, "L": L, "violations": len(bad)})
    return ok, {"runs": rows, "tolerance": 1e-12}


def check_oversmoothing(seed: int = 0) -> tuple[bool, dict]:
    cfg = ModelConfig("mean_gnn", layers=32, dim=4, seed=seed)
    model = init_model(cfg)
    rows, ok = [], True
    for g in canonical_graphs():
        X = np.random.default_rng([seed, g.n]).standard_normal((g.n, cfg.dim))
        curve = oversmoothing_curve(forward(model, g, X), g)
        diam = np.array(curve.extra["diameter"])
        # strictly decreasing until an exact collapse to 0 (complete graphs get there in one step)
        mono = bool(np.all((diam[1:] < diam[:-1]) | ((diam[1:] == 0) & (diam[:-1] == 0))))
        e0, e_last = curve.values[0], curve.values[-1]
        decayed = e_last <= 1e-6 * e0
        ok &= mono and decayed
        rows.append({"graph": g.name, "monotone_diameter": mono, "energy_ratio": e_last / e0 if e0 else 0.0})
    maps, worst = 0, -np.inf
    rng = np.random.default_rng(seed)
    for run in range(50):
        tcfg = ModelConfig("transformer", layers=3, dim=4, seed=seed * 100 + run,
                           heads=1 + run % 2, causal=bool(run % 3 == 0), residual=bool(run % 4 == 1))
        tmodel = init_model(tcfg)
        n = int(rng.integers(3, 9))
        trace = forward(tmodel, None, rng.standard_normal((n, tcfg.dim)))
        for l, att in enumerate(trace.attention):
            for h in range(att.shape[0]):
                ratio = diameter_ratio(att[h], trace.values[l][h])
                worst = max(worst, ratio - contraction_factor(att[h]))
                maps += 1
    contraction_ok = worst <= 1e-12
    ok &= contraction_ok
    return ok, {"graphs": rows, "attention_maps": maps, "max_ratio_minus_factor": float(worst)}


def check_last_token(seed: int = 0) -> tuple[bool, dict]:
    lengths = [2, 4, 8, 16, 32, 64]
    base = ModelConfig("transformer", layers=1, dim=4, seed=seed, causal=True, uniform_attention=True)
    series = last_token_collapse(base, lengths, seed=seed)
    model = init_model(base)
    ab = np.random.default_rng([seed, 1]).standard_normal((2, base.dim))
    c = float(np.linalg.norm((ab[0] - ab[1]) @ model.weights[0]["V0"]))
    rel = [abs(v - c / n) / (c / n) for n, v in zip(lengths, series.values)]
    res = last_token_collapse(ModelConfig(**{**base.to_dict(), "residual": True}), lengths, seed=seed)
    dominated = [r >= v for r, v in zip(res.values, series.values)]
    ok = max(rel) <= 1e-9 and all(dominated)
    return ok, {"lengths": lengths, "c": c, "no_residual": list(series.values), "max_rel_err": max(rel),
                "residual": list(res.values), "residual_dominates": dominated}


def _harmonic(n: int) -> Fraction:
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


def check_causal_geometry(seed: int = 0) -> tuple[bool, dict]:
    rows, ok = [], True
    for n in (3, 5, 16):
        g = G.causal(n)
        sizes_ok = all(len(G.receptive_field(g, i, h)) == i + 1 for i in range(n) for h in (1, 2, 3))
        ablation = init_model(ModelConfig("transformer", layers=4, dim=4, heads=2, seed=seed, causal=True,
                                          identity_weights=True))
        X = np.random.default_rng([seed, n]).standard_normal((n, 4))
        tr = forward(ablation, None, X)
        fixpoint = all(np.array_equal(h[0], tr.features[0][0]) for h in tr.features)
        rnd = forward(init_model(ModelConfig("transformer", layers=3, dim=4, heads=2, seed=seed, causal=True)),
                      None, X)
        upper = max(float(np.abs(np.triu(a, 1)).max()) for t in (tr, rnd) for layer in t.attention
                    for a in layer)
        uni = forward(init_model(ModelConfig("transformer", layers=1, dim=4, seed=seed, causal=True,
                                             uniform_attention=True)), None, X)
        mass = sink_report(uni).sink_score
        expect = float(_harmonic(n) / n)
        mass_ok = abs(mass - expect) <= 1e-12
        lower_ok = upper == 0.0
        ok &= sizes_ok and fixpoint and lower_ok and mass_ok
        rows.append({"n": n, "receptive_sizes_ok": sizes_ok, "first_token_fixpoint": fixpoint,
                     "max_upper_triangle": upper, "sink_mass": mass, "harmonic_over_n": expect})
    return ok, {"cases": rows}


def check_differential(seed: int = 0) -> tuple[bool, dict]:
    rows, ok = [], True
    X = np.random.default_rng(seed).standard_normal((6, 4))
    for causal in (True, False):
        for heads in (1, 2):
            base = dict(arch="transformer", layers=3, dim=4, heads=heads, seed=seed, causal=causal)
            for lam in (0.3, 0.8):
                tr = forward(init_model(ModelConfig(**base, differential_lambda=lam)), None, X)
                err = max(float(np.abs(a.sum(axis=2) - (1 - lam)).max()) for a in tr.attention)
                ok &= err <= 1e-12
                rows.append({"causal": causal, "heads": heads, "lambda": lam, "max_row_sum_err": err})
            std = forward(init_model(ModelConfig(**base)), None, X)
            zero = forward(init_model(ModelConfig(**base, differential_lambda=0.0)), None, X)
            same = all(np.array_equal(a, b) for a, b in zip(std.features, zero.features))
            ok &= same
            rows.append({"causal": causal, "heads": heads, "lambda": 0.0, "bit_identical": same})
    return ok, {"cases": rows}


def check_rewiring() -> tuple[bool, dict]:
    p3 = rewire_greedy(G.path(3), "spectral_gap", 1)
    step = p3.steps[0] if p3.steps else None
    p3_ok = (step is not None and step.edge == (0, 2) and abs(step.before - 1.0) <= 1e-9
             and abs(step.after - 1.5) <= 1e-9)
    bb = G.barbell(4)
    series = {}
    mono = True
    for obj in ("spectral_gap", "curvature", "resistance"):
        plan = rewire_greedy(bb, obj, 3)
        s = plan.objective_series()
        series[obj] = s
        diffs = np.diff(s)
        mono &= bool(np.all(diffs < 0) if obj == "resistance" else np.all(diffs > 0)) and len(s) >= 2
    plan = rewire_greedy(bb, "resistance", 3)
    rayleigh = True
    g = bb
    prev = effective_resistance_matrix(g).values
    for st in plan.steps:
        g = g.edit(add=[st.edge])
        cur = effective_resistance_matrix(g).values
        rayleigh &= bool(np.all(cur <= prev + 1e-12))
        prev = cur
    ok = p3_ok and mono and rayleigh
    return ok, {"p3_step": None if step is None else {"edge": list(step.edge), "before": step.before,
                                                      "after": step.after},
                "barbell4_series": series, "monotone": mono, "rayleigh": rayleigh}


# registry -------------------------------------------------------------

CHECKS = [
    (1, "Cheeger inequality sweep", 60, check_cheeger),
    (2, "Commute-time identity", 120, check_commute),
    (3, "Bound dominance", 120, check_bounds),
    (4, "Under-reaching exactness", 30, check_underreaching),
    (5, "Over-smoothing and contraction", 60, check_oversmoothing),
    (6, "Last-token collapse closed form", 30, check_last_token),
    (7, "Causal geometry", 10, check_causal_geometry),
    (8, "Differential attention identities", 10, check_differential),
    (9, "Rewiring", 60, lambda seed=0: check_rewiring()),
]
REPRO_BUDGET = 600


def run_check(number: int, seed: int = 0) -> CheckResult:
    for num, name, budget, fn in CHECKS:
        if num == number:
            t0 = time.perf_counter()
            ok, details = fn(seed=seed)
            dt = time.perf_counter() - t0
            return CheckResult(num, name, bool(ok) and dt < budget, details, dt, budget)
    raise KeyError(number)


def build_bundle(results: list[CheckResult], seed: int, fmt: str = "both") -> Bundle:
    bundle = Bundle("verify", {"checks": [r.number for r in results]}, seed, fmt)
    bundle.add("results", [r.to_dict() for r in results])
    lines = ["# verify acceptance summary", "number,name,passed"]
    lines += [f"{r.number},{r.name},{int(r.passed)}" for r in results]
    bundle.add_csv("verify_summary", "\n".join(lines) + "\n")
    return bundle


def run_all(seed: int = 0, numbers=None, repro: bool = True, out_dir: str | None = None,
            fmt: str = "both", echo=print, argv: list[str] | None = None) -> list[CheckResult]:
    """Run checks 1-9, write the bundle, and (criterion 10) re-run to compare bytes."""
    numbers = [n for n, *_ in CHECKS] if numbers is None else list(numbers)
    t0 = time.perf_counter()
    results = []
    for num in numbers:
        res = run_check(num, seed)
        results.append(res)
        if echo:
            echo(res.line)
    bundle = build_bundle(results, seed, fmt)
    bundle.argv = argv
    if out_dir:
        bundle.write(out_dir)
    if repro:
        with tempfile.TemporaryDirectory() as tmp:
            first, second = os.path.join(tmp, "a"), os.path.join(tmp, "b")
            bundle.write(first)
            again = [run_check(num, seed) for num in numbers]
            rerun = build_bundle(again, seed, fmt)
            rerun.argv = argv
            rerun.write(second)
            diffs = compare_bundles(first, second)
        dt = time.perf_counter() - t0
        res = CheckResult(10, "Reproducibility (byte-identical bundles)", not diffs and dt < REPRO_BUDGET,
                          {"differing_files": diffs}, dt, REPRO_BUDGET)
        results.append(res)
        if echo:
            echo(res.line)
    return results
