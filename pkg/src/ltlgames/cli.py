"""Command-line front end.

Exit codes: 0 on success, 2 on invalid input, 1 on any other failure.
Input paths of the form ``fixture:NAME`` refer to files bundled with the
package (see ``ltlgames fixtures``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .automata import disagreements, parse_hoa
from .envs import build_adversary_game, build_robust_game, parse_grid_spec
from .errors import CapExceededError, InputError
from .game import StochasticGame, dump_game, load_game
from .learner import LearnParams, greedy_strategy, minimax_q
from .ltl import parse_ltl
from .oracle import (
    DEFAULT_CAP,
    discounted_minimax_vi,
    enumerate_maximin,
    evaluate_strategy,
    exact_maximin,
    maximin_reach,
    winning_set,
    worst_case_probability,
)
from .reward import OVERLAP_POLICIES, RewardScheme
from .synthesis import (
    FiniteMemoryStrategy,
    build_kcopy,
    build_product,
    break_switch_cycles,
    induce_strategy,
    load_strategy,
)

FIXTURE_PREFIX = "fixture:"
ORACLE_LIMIT_C = 0.001
ARROWS = {"North": "^", "South": "v", "East": ">", "West": "<"}


# ------------------------------------------------------------------ I/O


def resolve_path(path: str):
    if path.startswith(FIXTURE_PREFIX):
        ref = resources.files("ltlgames") / "fixtures" / path[len(FIXTURE_PREFIX):]
        if not ref.is_file():
            raise InputError(f"no bundled fixture {path[len(FIXTURE_PREFIX):]!r}")
        return ref
    return Path(path)


def read_input(path: str) -> str:
    try:
        return resolve_path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _with_context(path: str, fn, text: str):
    try:
        return fn(text)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_game_file(path: str) -> StochasticGame:
    return _with_context(path, load_game, read_input(path))


def write_text(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def values_csv(g: StochasticGame, values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state_index", "meta", "value"])
    for s, v in enumerate(values):
        w.writerow([s, json.dumps(g.state_meta(s), sort_keys=True, separators=(",", ":")), repr(float(v))])
    return buf.getvalue()


def read_values_csv(text: str) -> dict[int, float]:
    try:
        rows = list(csv.DictReader(io.StringIO(text)))
        return {int(r["state_index"]): float(r["value"]) for r in rows}
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"malformed values CSV: {exc}") from None


def memoryless_fms(g: StochasticGame, mu) -> FiniteMemoryStrategy:
    return FiniteMemoryStrategy(1, {(s, 1): ("action", a) for s, a in mu.items()})


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


# ------------------------------------------------------------- commands


def cmd_env(args) -> int:
    spec = _with_context(args.grid, parse_grid_spec, read_input(args.grid))
    g = build_robust_game(spec) if args.kind == "robust" else build_adversary_game(spec)
    write_text(args.out, dump_game(g))
    _emit({"states": g.n_states, "out": str(args.out)})
    return 0


def cmd_product(args) -> int:
    g = load_game_file(args.game)
    a = _with_context(args.hoa, parse_hoa, read_input(args.hoa))
    if args.ltl is not None:
        f = _with_context("--ltl", parse_ltl, args.ltl)
        bad = disagreements(a, f, args.samples, seed=args.seed)
        if bad:
            w = bad[0]
            raise InputError(
                f"{args.hoa}: automaton disagrees with the formula on {len(bad)} of {args.samples} "
                f"random lassos, e.g. prefix {[sorted(x) for x in w.prefix]} "
                f"cycle {[sorted(x) for x in w.cycle]}"
            )
    p = _with_context(args.hoa, lambda _: build_product(g, a, prune=not args.no_prune), "")
    write_text(args.out, dump_game(p))
    _emit({"states": p.n_states, "pairs": p.k, "out": str(args.out)})
    return 0


def cmd_kcopy(args) -> int:
    g = load_game_file(args.game)
    kg = build_kcopy(g)
    write_text(args.out, dump_game(kg))
    _emit({"states": kg.n_states, "k": g.k, "out": str(args.out)})
    return 0


# --------------------------------------------------------------- learning


def _learn_inputs(game_path: str, hoa_path: str | None):
    game_text = read_input(game_path)
    g = _with_context(game_path, load_game, game_text)
    inputs = {"game": {"path": game_path, "sha256": sha256_text(game_text)}}
    if hoa_path is not None:
        hoa_text = read_input(hoa_path)
        a = _with_context(hoa_path, parse_hoa, hoa_text)
        g = _with_context(hoa_path, lambda _: build_product(g, a), "")
        inputs["hoa"] = {"path": hoa_path, "sha256": sha256_text(hoa_text)}
    if g.k == 0:
        raise InputError(f"{game_path}: game has no Rabin pairs; pass --hoa or build a product first")
    return g, inputs


def learn_once(game_path: str, hoa_path: str | None, params: dict, outdir: str) -> dict:
    """One learning run; writes strategy, Q table, values and manifest into ``outdir``."""
    p = LearnParams.from_json(params)
    g, inputs = _learn_inputs(game_path, hoa_path)
    # k = 1 also goes through the k-copy construction: one code path for all k
    learned = build_kcopy(g)
    scheme = RewardScheme.for_pair(learned.rabin_pairs[0], p.c, p.overlap)
    q = minimax_q(learned, scheme, p)
    mu, _ = greedy_strategy(q, learned)
    mu, repaired = break_switch_cycles(learned, mu, q.q)
    fms = induce_strategy(learned, mu)
    artifacts = {
        "strategy.json": json.dumps(fms.to_json(g), indent=1, sort_keys=True) + "\n",
        "q.csv": q.to_csv(learned),
        "values.csv": values_csv(learned, q.state_values(learned)),
    }
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in artifacts.items():
        write_text(out / name, text)
    manifest = {
        "tool": "ltlgames",
        "versions": {
            "ltlgames": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": numba.__version__,
        },
        "inputs": inputs,
        "params": p.to_json(),
        "scheme": scheme.describe(),
        "reduction": "kcopy",
        "learned_states": learned.n_states,
        "q_checksum": q.checksum(),
        "switch_cycles_replaced": repaired,
        "outputs": {name: {"path": name, "sha256": sha256_text(text)} for name, text in artifacts.items()},
    }
    write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {
        "outdir": str(out),
        "seed": p.seed,
        "q_checksum": q.checksum(),
        "value_at_initial": float(q.state_values(learned)[learned.initial]),
    }


def cmd_learn(args) -> int:
    if args.manifest:
        doc = json.loads(read_input(args.manifest))
        try:
            game_path = doc["inputs"]["game"]["path"]
            hoa = doc["inputs"].get("hoa")
            params = doc["params"]
        except (KeyError, TypeError):
            raise InputError(f"{args.manifest}: not a run manifest") from None
        for entry in [doc["inputs"]["game"]] + ([hoa] if hoa else []):
            if sha256_text(read_input(entry["path"])) != entry["sha256"]:
                raise InputError(f"{entry['path']}: content changed since the manifest was written")
        _emit(learn_once(game_path, hoa["path"] if hoa else None, params, args.out))
        return 0
    if args.game is None:
        raise InputError("learn needs a game file or --manifest")
    try:
        base = LearnParams(
            episodes=args.episodes,
            max_steps=args.max_steps,
            eps_start=args.eps_start,
            eps_end=args.eps_end,
            alpha_start=args.alpha_start,
            alpha_end=args.alpha_end,
            seed=args.seed,
            c=args.c,
            start=args.start,
            overlap=args.overlap,
        )
        RewardScheme(args.c, frozenset(), frozenset(), args.overlap)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.runs < 1 or args.jobs < 1:
        raise InputError("--runs and --jobs must be at least 1")
    jobs = []
    for i in range(args.runs):
        params = {**base.to_json(), "seed": args.seed + i}
        outdir = args.out if args.runs == 1 else os.path.join(args.out, f"seed-{args.seed + i}")
        jobs.append((args.game, args.hoa, params, outdir))
    if args.jobs == 1 or args.runs == 1:
        results = [learn_once(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(learn_once, *zip(*jobs)))
    _emit(results if args.runs > 1 else results[0])
    return 0


# --------------------------------------------------------- oracle & eval


def cmd_oracle(args) -> int:
    g = load_game_file(args.game)
    if args.method == "exact":
        res = exact_maximin(g, args.cap)
        work, fms = g, memoryless_fms(g, res.mu)
    else:
        if g.k == 0:
            raise InputError(f"{args.game}: game has no Rabin pairs")
        work = build_kcopy(g) if g.k > 1 else g
        if args.method == "enumeration":
            res = enumerate_maximin(work, args.cap)
        else:
            res = discounted_minimax_vi(work, RewardScheme.for_pair(work.rabin_pairs[0], args.c))
        if g.k > 1:
            successor_values = work.arrays.transition_matrix() @ res.values
            fms = induce_strategy(work, break_switch_cycles(work, res.mu, successor_values)[0])
        else:
            fms = memoryless_fms(g, res.mu)
    if args.out:
        write_text(args.out, values_csv(work, res.values))
    if args.strategy_out:
        write_text(args.strategy_out, json.dumps(fms.to_json(g), indent=1, sort_keys=True) + "\n")
    _emit(
        {
            "method": res.method,
            "states": work.n_states,
            "value_at_initial": float(res.values[work.initial]),
            "reduction": "kcopy" if work is not g else "none",
        }
    )
    return 0


def _maximin_report(g: StochasticGame, cap: int) -> tuple[float | None, str]:
    try:
        if g.k == 1:
            return float(enumerate_maximin(g, cap).values[g.initial]), "enumeration"
        return float(exact_maximin(g, cap).values[g.initial]), "enumeration+end-components"
    except CapExceededError:
        work = build_kcopy(g) if g.k > 1 else g
        v = discounted_minimax_vi(work, RewardScheme.for_pair(work.rabin_pairs[0], ORACLE_LIMIT_C))
        return float(v.values[work.initial]), f"value-iteration(c={ORACLE_LIMIT_C})"


def cmd_eval(args) -> int:
    g = load_game_file(args.game)
    if g.k == 0:
        raise InputError(f"{args.game}: game has no Rabin pairs")
    fms = _with_context(args.strategy, lambda t: load_strategy(t, g), read_input(args.strategy))
    worst = worst_case_probability(g, fms)
    report = {
        "initial_state": g.initial,
        "pairs": g.k,
        "worst_case": float(worst[g.initial]),
        "worst_case_method": "end-components",
    }
    if g.k == 1 and fms.k == 1 and not fms.uses_switches():
        try:
            enum = evaluate_strategy(g, fms.memoryless(1), args.cap)
            report["worst_case_enumeration"] = float(enum[g.initial])
        except CapExceededError as exc:
            report["worst_case_enumeration"] = None
            report["notes"] = [str(exc)]
    maximin, method = _maximin_report(g, args.cap)
    report["maximin"] = maximin
    report["maximin_method"] = method
    report["gap"] = maximin - report["worst_case"]
    if g.k > 1:
        try:
            sets = [winning_set(g, j, args.cap) for j in range(g.k)]
            report["winning_set_sizes"] = [len(w) for w in sets]
            W = frozenset().union(*sets)
            report["kcopy_lower_bound"] = float(maximin_reach(g, W, args.cap).values[g.initial])
        except CapExceededError as exc:
            report["kcopy_lower_bound"] = None
            report.setdefault("notes", []).append(str(exc))
    if args.out:
        write_text(args.out, values_csv(g, worst))
    _emit(report)
    return 0


# ---------------------------------------------------------------- render


def _position_key(g: StochasticGame) -> str | None:
    return g.meta.get("position_key") if "grid" in g.meta else None


_HIDDEN = {"role", "game_state", "product_state", "dummy"}


def _group_key(meta: dict, pos_key: str) -> tuple:
    return tuple(sorted((k, json.dumps(v)) for k, v in meta.items() if k != pos_key and k not in _HIDDEN))


def render_strategy(g: StochasticGame, fms: FiniteMemoryStrategy) -> str:
    pos_key = _position_key(g)
    lines = []
    if pos_key is None:
        lines.append("state\tmode\tchoice\tmeta")
        for s in g.controller_states:
            for mode in range(1, fms.k + 1):
                kind, value = fms.choice[(s, mode)]
                choice = g.actions[s][value] if kind == "action" else f"switch->{value}"
                lines.append(f"{s}\t{mode}\t{choice}\t{json.dumps(g.state_meta(s), sort_keys=True)}")
        return "\n".join(lines) + "\n"
    grid = g.meta["grid"]
    groups: dict[tuple, dict] = {}
    for s in g.controller_states:
        meta = g.state_meta(s)
        if pos_key not in meta:
            continue
        for mode in range(1, fms.k + 1):
            key = (mode,) + _group_key(meta, pos_key)
            kind, value = fms.choice[(s, mode)]
            mark = ARROWS.get(g.actions[s][value], "?") if kind == "action" else str(value)
            groups.setdefault(key, {})[tuple(meta[pos_key])] = mark
    for key in sorted(groups):
        cells = groups[key]
        title = ", ".join([f"mode {key[0]}"] + [f"{k}={v}" for k, v in key[1:]])
        lines.append(f"[{title}]")
        for y, row in enumerate(grid["rows"]):
            lines.append(" ".join("#" if row[x] == "#" else cells.get((x, y), ".") for x in range(len(row))))
        lines.append("")
    return "\n".join(lines)


def render_values(g: StochasticGame, values: dict[int, float]) -> str:
    pos_key = _position_key(g)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state_index", "x", "y", "value", "meta"])
    for s in sorted(values):
        meta = g.state_meta(s) if s < g.n_states else {}
        pos = meta.get(pos_key) if pos_key else None
        x, y = (pos if pos else ("", ""))
        w.writerow([s, x, y, repr(values[s]), json.dumps(meta, sort_keys=True, separators=(",", ":"))])
    return buf.getvalue()


def cmd_render(args) -> int:
    g = load_game_file(args.game)
    if args.strategy:
        fms = _with_context(args.strategy, lambda t: load_strategy(t, g), read_input(args.strategy))
        text = render_strategy(g, fms)
    else:
        values = read_values_csv(read_input(args.values))
        if g.k >= 1 and any(s >= g.n_states for s in values):
            g = build_kcopy(g)  # learned values are indexed by the k-copy game
        if any(not 0 <= s < g.n_states for s in values):
            raise InputError(f"{args.values}: state indices do not match {args.game}")
        text = render_values(g, values)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_fixtures(args) -> int:
    for ref in sorted(resources.files("ltlgames").joinpath("fixtures").iterdir(), key=lambda r: r.name):
        if ref.is_file():
            print(FIXTURE_PREFIX + ref.name)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ltlgames",
        description="LTL strategy synthesis for turn-based stochastic games via minimax-Q learning.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("env", help="generate a grid-world game from a grid spec")
    p.add_argument("kind", choices=["robust", "adversary"])
    p.add_argument("grid", help="grid spec file")
    p.add_argument("-o", "--out", required=True, help="output game JSON")
    p.set_defaults(func=cmd_env)

    p = sub.add_parser("product", help="product of a game with a Rabin automaton (HOA)")
    p.add_argument("game")
    p.add_argument("hoa")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--no-prune", action="store_true", help="keep all |S|*|Q| states")
    p.add_argument("--ltl", help="check the automaton against this formula on random lassos first")
    p.add_argument("--samples", type=int, default=1000, help="lassos for --ltl (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="seed for --ltl sampling")
    p.set_defaults(func=cmd_product)

    p = sub.add_parser("kcopy", help="reduce a Rabin(k) game to a Rabin(1) game")
    p.add_argument("game")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_kcopy)

    p = sub.add_parser("learn", help="minimax-Q learning; k-copy reduction is applied when k > 1")
    p.add_argument("game", nargs="?", help="game JSON (omit with --manifest)")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--hoa", help="build the product with this automaton first")
    p.add_argument("--manifest", help="rerun exactly the run recorded in this manifest")
    p.add_argument("--c", type=float, default=0.01, help="reward scheme parameter (default 0.01)")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=1000, help="steps per episode (default 1000)")
    p.add_argument("--eps-start", type=float, default=0.5)
    p.add_argument("--eps-end", type=float, default=0.05)
    p.add_argument("--alpha-start", type=float, default=0.5)
    p.add_argument("--alpha-end", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", choices=["uniform", "initial"], default="uniform",
                   help="episode start states (default uniform over all states)")
    p.add_argument("--bc-overlap", dest="overlap", choices=OVERLAP_POLICIES, default="c-wins",
                   help="treatment of states in both B and C")
    p.add_argument("--runs", type=int, default=1, help="independent runs with seeds seed..seed+runs-1")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("oracle", help="model-based values and an optimal strategy")
    p.add_argument("game")
    p.add_argument("--method", choices=["enumeration", "vi", "exact"], default="enumeration",
                   help="enumeration and vi work on the Rabin(1) (k-copy) game; exact on the Rabin(k) game")
    p.add_argument("--c", type=float, default=ORACLE_LIMIT_C, help="reward parameter for vi")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="max enumerated strategy combinations")
    p.add_argument("-o", "--out", help="per-state values CSV")
    p.add_argument("--strategy-out", help="optimal strategy JSON")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="worst-case satisfaction probability of a strategy")
    p.add_argument("game", help="the Rabin(k) game the strategy was written for")
    p.add_argument("strategy")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("-o", "--out", help="per-state worst-case CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="ASCII strategy grids or a values table")
    p.add_argument("game")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--strategy")
    g.add_argument("--values")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fixtures", help="list bundled fixture files")
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
