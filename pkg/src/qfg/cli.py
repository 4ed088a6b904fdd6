"""Command-line experiment driver.

Every subcommand writes a CSV table (to ``--out`` or standard output) and a
one-line summary (to standard output, or standard error when the table
itself goes to standard output).

Exit codes: 0 success, 1 usage error, 2 invalid graph document,
3 numerical failure or contradictory graph.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .amplify import amplify_step, gamma_profile, sample_amplify_step
from .engine import ActivationCache, exact_posterior, run_schedule, run_trials, trial_rng
from .errors import GraphParseError, QFGError
from .factor_graph import PRESETS, FactorGraph, load_graph, load_preset
from .oracle import brute_force_posterior
from .schedule import completion_curve, monte_carlo_completion, preset_priors, spec_from_graph
from .spa import hard_decision, run_spa
from .statevector import StateVector, bitstring, measure_subset, reorder, tensor_product

EXIT_USAGE = 1
EXIT_GRAPH = 2
EXIT_NUMERIC = 3

# cap on graph evolutions spent on one decode trial before it counts as failed
DECODE_BUDGET = 100_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """CSV cell: floats at 17 significant digits, everything else via ``str``."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def parse_floats(text: str) -> list[float]:
    """``"0.5"``, ``"0.1,0.2"`` or an inclusive range ``"start:stop:step"``."""
    values: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            try:
                start, stop, step = (float(x) for x in part.split(":"))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad range {part!r}") from None
            if step <= 0 or stop < start:
                raise argparse.ArgumentTypeError(f"bad range {part!r}")
            n = int(round((stop - start) / step))
            values.extend(round(start + i * step, 12) for i in range(n + 1))
        else:
            try:
                values.append(float(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not a number: {part!r}") from None
    return values


def resolve_graph(spec: str) -> FactorGraph:
    path = Path(spec)
    if path.is_file():
        try:
            return load_graph(path)
        except (OSError, UnicodeDecodeError) as exc:
            raise GraphParseError(f"cannot read {spec}: {exc}") from None
    if spec in PRESETS:
        return load_preset(spec)
    raise GraphParseError(f"{spec!r} is neither a readable file nor a preset ({', '.join(PRESETS)})")


def resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("QFG_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"QFG_SEED must be an integer, got {env!r}") from None


def state_in_order(blocks: Sequence[StateVector], order: Sequence[str]) -> StateVector:
    state = StateVector.empty()
    for b in blocks:
        state = tensor_product(state, b)
    return reorder(state, order)


# --- subcommands -------------------------------------------------------------
# each returns (header, rows, summary)

Table = tuple[list[str], list[list], str]


def cmd_posterior(args) -> Table:
    graph = resolve_graph(args.graph)
    p_total, state = exact_posterior(graph)
    probs = state.probabilities()
    top = probs.max()
    rows = []
    for v in np.flatnonzero(probs > 0):
        p = float(probs[v])
        rows.append([bitstring(int(v), state.n_qubits), p_total * p, p, p >= top * (1 - 1e-12)])
    rows.append(["p_total", p_total, 1.0, ""])
    ml = [r[0] for r in rows[:-1] if r[3]]
    return ["assignment", "mass", "probability", "is_ml"], rows, \
        f"p_total={fmt(p_total)} codewords={len(rows) - 1} ml={','.join(ml)}"


def cmd_spa(args) -> Table:
    graph = resolve_graph(args.graph)
    state = run_spa(graph, max_iters=args.max_iters, tol=args.tol)
    rows = [[vid, *state.belief(vid)] for vid in state.variable_ids]
    rows.append(["converged", state.converged, state.iterations])
    return ["variable", "p0", "p1"], rows, \
        f"converged={state.converged} iterations={state.iterations} decision={hard_decision(state)}"


def cmd_run(args) -> Table:
    graph = resolve_graph(args.graph)
    seed = resolve_seed(args.seed)
    results = run_trials(graph, args.trials, seed, max_ticks=args.max_ticks, workers=args.workers)
    rows = [[i, done, ticks] for i, (done, ticks) in enumerate(results)]
    ok = [ticks for done, ticks in results if done]
    mean = float(np.mean(ok)) if ok else float("nan")
    rows.append(["summary", len(ok), mean])
    return ["trial", "completed", "ticks"], rows, \
        f"completed={len(ok)}/{args.trials} mean_ticks={fmt(mean)} seed={seed}"


def cmd_amplify(args) -> Table:
    sweep = len(args.alpha2) > 1
    header = (["alpha2"] if sweep else []) + ["k", "gamma_k", "p_Mk", "p_ak", "expected_copies"]
    rows = []
    for a2 in args.alpha2:
        if not 0.0 <= a2 <= 1.0:
            raise UsageError(f"alpha2 must lie in [0, 1], got {a2}")
        for s in gamma_profile(a2, args.k).steps:
            rows.append(([a2] if sweep else []) + [s.k, s.gamma_k, s.p_Mk, s.p_ak, s.expected_copies])
    last = rows[-1]
    return header, rows, f"alpha2={fmt(args.alpha2[-1])} k={args.k} gamma_k={fmt(last[-4])} p_Mk={fmt(last[-3])}"


def cmd_amplify_state(args) -> Table:
    graph = resolve_graph(args.graph)
    seed = resolve_seed(args.seed)
    ml_set = set(brute_force_posterior(graph).ml_set)
    _, state = exact_posterior(graph)
    ids = state.qubit_ids
    reached = np.zeros(args.k + 1, dtype=np.int64)
    ml_hits = np.zeros(args.k + 1, dtype=np.int64)
    for trial in range(args.trials):
        rng = trial_rng(seed, trial)
        s = state
        for level in range(args.k + 1):
            if level > 0:
                s = sample_amplify_step(s, rng)
                if s is None:
                    break
            reached[level] += 1
            read = measure_subset(s, ids, rng=rng).outcome
            ml_hits[level] += read in ml_set
    rows = []
    analytic = 1.0
    s = state
    for level in range(args.k + 1):
        if level > 0:
            p, s = amplify_step(s)
            analytic *= p
        freq = ml_hits[level] / reached[level] if reached[level] else float("nan")
        rows.append([level, reached[level] / args.trials, analytic, freq])
    return ["k", "empirical_success", "analytic_success", "ml_read_frequency"], rows, \
        f"trials={args.trials} reached_k={reached[-1]} ml_read_frequency={fmt(rows[-1][3])} seed={seed}"


def cmd_sched(args) -> Table:
    base = load_preset(args.preset)
    u2s: list[float | None] = list(args.u2) if args.u2 else [None]
    uvars = tuple(v.strip() for v in args.uvars.split(",")) if args.uvars else ("x0",)
    lead = (["w2"] if len(args.w2) > 1 else []) + (["u2"] if len(u2s) > 1 else [])
    header = lead + ["t", "p_e_paper", "p_e_renewal", "p_m_paper", "p_m_renewal", "P_nondist"]
    if args.trials:
        header += ["mc_p_m", "mc_stderr"]
    seed = resolve_seed(args.seed)
    rows = []
    for w2 in args.w2:
        for u2 in u2s:
            for p in (w2, u2):
                if p is not None and not 0.0 <= p <= 1.0:
                    raise UsageError(f"prior probabilities must lie in [0, 1], got {p}")
            try:
                graph = preset_priors(base, w2, u2, uvars)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            curve = completion_curve(spec_from_graph(graph), args.tmax)
            mc = None
            if args.trials and args.tmax:
                mc = monte_carlo_completion(graph, args.tmax, args.trials, seed, workers=args.workers)
            prefix = ([w2] if len(args.w2) > 1 else []) + ([u2] if len(u2s) > 1 else [])
            for i, t in enumerate(curve.t):
                row = prefix + [int(t), curve.p_e_paper[i], curve.p_e_renewal[i],
                                curve.p_m_paper[i], curve.p_m_renewal[i], curve.P_nondist[i]]
                if mc is not None:
                    row += [mc.p_m[i], mc.stderr[i]]
                rows.append(row)
    target = args.out or "stdout"
    return header, rows, f"curve rows={len(rows)} preset={args.preset} written to {target}"


def _prepare_posterior(graph: FactorGraph, rng, cache, max_ticks: int, budget: list[int]) -> StateVector | None:
    # one full graph evolution, repeated until it completes within max_ticks
    while budget[0] > 0:
        budget[0] -= 1
        rep = run_schedule(graph, "sample", rng=rng, max_ticks=max_ticks, init_mode="qpa",
                           record_events=False, cache=cache)
        if rep.completed:
            return state_in_order(rep.states, graph.variable_ids)
    return None


def _prepare_level(graph, level: int, rng, cache, max_ticks: int, budget: list[int]) -> StateVector | None:
    if level == 0:
        return _prepare_posterior(graph, rng, cache, max_ticks, budget)
    while budget[0] > 0:
        a = _prepare_level(graph, level - 1, rng, cache, max_ticks, budget)
        if a is None:
            return None
        b = _prepare_level(graph, level - 1, rng, cache, max_ticks, budget)
        if b is None:
            return None
        # both copies are the same pure state; the operational step consumes them
        out = sample_amplify_step(a, rng)
        if out is not None:
            return out
    return None


def cmd_decode(args) -> Table:
    graph = resolve_graph(args.graph)
    seed = resolve_seed(args.seed)
    ml_set = set(brute_force_posterior(graph).ml_set)
    cache = ActivationCache()
    counts: Counter[str] = Counter()
    evolutions = 0
    for trial in range(args.trials):
        rng = trial_rng(seed, trial)
        budget = [DECODE_BUDGET]
        state = _prepare_level(graph, args.amplify_k, rng, cache, args.max_ticks, budget)
        evolutions += DECODE_BUDGET - budget[0]
        if state is None:
            counts["failed"] += 1
            continue
        counts[measure_subset(state, state.qubit_ids, rng=rng).outcome] += 1
    decoded = args.trials - counts["failed"]
    rows = [[cw, counts[cw] / args.trials] for cw in sorted(counts) if cw != "failed"]
    ml_rate = sum(counts[cw] for cw in ml_set) / args.trials
    rows.append(["success_rate", decoded / args.trials])
    rows.append(["ml_rate", ml_rate])
    return ["codeword", "frequency"], rows, \
        f"decoded={decoded}/{args.trials} ml_rate={fmt(ml_rate)} evolutions={evolutions} seed={seed}"


# --- plumbing ----------------------------------------------------------------

def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _nonneg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qfg", description="Quantum factor-graph experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, graph: bool = True) -> None:
        if graph:
            p.add_argument("--graph", required=True, help="graph document path or preset name")
        p.add_argument("--out", help="CSV output path (default: standard output)")
        p.add_argument("--force", action="store_true", help="overwrite an existing --out file")

    def sampled(p: argparse.ArgumentParser, trials: int | None = 1000) -> None:
        p.add_argument("--trials", type=_positive if trials else _nonneg, default=trials)
        p.add_argument("--seed", type=int, default=None, help="master seed (default QFG_SEED or 0)")

    p = sub.add_parser("posterior", help="exact QPA posterior")
    common(p)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("spa", help="sum-product beliefs")
    common(p)
    p.add_argument("--max-iters", type=_positive, default=200)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_spa)

    p = sub.add_parser("run", help="sampled schedule runs")
    common(p)
    sampled(p)
    p.add_argument("--max-ticks", type=_positive, default=1000)
    p.add_argument("--workers", type=_positive, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("amplify", help="analytic amplification profile")
    common(p, graph=False)
    p.add_argument("--alpha2", type=parse_floats, required=True, help="value, list or start:stop:step")
    p.add_argument("--k", type=_nonneg, required=True)
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("amplify-state", help="operational amplification of the posterior")
    common(p)
    sampled(p)
    p.add_argument("--k", type=_nonneg, required=True)
    p.set_defaults(func=cmd_amplify_state)

    p = sub.add_parser("sched", help="two-phase completion curves")
    common(p, graph=False)
    sampled(p, trials=None)
    p.add_argument("--preset", choices=("chain4", "nine"), required=True)
    p.add_argument("--w2", type=parse_floats, required=True)
    p.add_argument("--u2", type=parse_floats)
    p.add_argument("--uvars", help="comma-separated variables taking the u2 prior (default x0)")
    p.add_argument("--tmax", type=_nonneg, required=True)
    p.add_argument("--workers", type=_positive, default=1)
    p.set_defaults(func=cmd_sched)

    p = sub.add_parser("decode", help="init, entangle, amplify and measure")
    common(p)
    sampled(p)
    p.add_argument("--amplify-k", type=_nonneg, default=0)
    p.add_argument("--max-ticks", type=_positive, default=1000)
    p.set_defaults(func=cmd_decode)
    return parser


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        if out is not None and out.exists() and not args.force:
            raise UsageError(f"{out} exists; pass --force to overwrite")
        command: Callable[..., Table] = args.func
        header, rows, summary = command(args)
    except UsageError as exc:
        print(f"qfg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphParseError as exc:
        print(f"qfg: invalid graph: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except (QFGError, ValueError, FloatingPointError) as exc:
        print(f"qfg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render_csv(header, rows)
    if out is None:
        sys.stdout.write(text)
        print(summary, file=sys.stderr)
    else:
        try:
            out.write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"qfg: error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
