"""Command-line front end.

    qwhit hit          --n N --coin C --init I --method {iterate,direct,cgnr,neumann}
    qwhit sweep-kappa  --coin C --n-min A --n-max B [--random-coins K --seed S]
    qwhit compare      --n N --coin C --init I --methods iterate,direct,...
    qwhit hhl          --n N --coin C --init I --clock 8 --shots 0

Exit codes: 0 success, 1 invalid input, 2 numerical non-convergence.
``--config FILE`` loads a flat JSON object whose keys mirror the flag names;
flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from qwhit import hhl, numerics, reduction
from qwhit.errors import NotConvergedError, QwhitError
from qwhit.walk import Coin, InitialState, WalkSpec, hitting_prob_iterative

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2
HIT_METHODS = ("iterate", "direct", "cgnr", "neumann")
COMPARE_METHODS = HIT_METHODS + ("hhl",)
AGREE_TOL = 1e-6
HHL_AGREE_TOL = 0.05
HHL_MAX_N = 5
# Literal decimals typed on a command line are renormalized if this close.
INPUT_ROUNDING = 1e-6


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # One-line diagnostic and exit code 1 instead of argparse's usage dump.
        raise QwhitError(message)


def parse_coin(text: str, constraint: str = "unit") -> Coin:
    """``hadamard`` or ``a=..,b=..,theta=..`` (complex literals allowed)."""
    text = text.strip()
    if text.lower() == "hadamard":
        return Coin.hadamard()
    fields = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise QwhitError(f"bad coin field {part!r}; expected key=value")
        fields[key.strip()] = val.strip()
    if set(fields) - {"a", "b", "theta"} or not {"a", "b"} <= set(fields):
        raise QwhitError("coin needs a=..,b=.. and optionally theta=..")
    try:
        a, b = complex(fields["a"]), complex(fields["b"])
        theta = float(fields.get("theta", 0.0))
    except ValueError as exc:
        raise QwhitError(f"bad coin value: {exc}") from None
    if constraint == "unit":
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
    else:
        norm = abs(a) + abs(b)
    if norm > 0 and abs(norm - 1.0) <= INPUT_ROUNDING:
        a, b = a / norm, b / norm
    return Coin(a, b, theta, constraint)


def parse_init(text: str) -> InitialState:
    """``basis:K:D``, ``random:SEED``, ``random-real:SEED`` or ``explicit:z1,z2,...``."""
    kind, _, rest = text.strip().partition(":")
    try:
        if kind == "basis":
            k, _, d = rest.partition(":")
            return InitialState.basis(int(k), d or "L")
        if kind == "random":
            return InitialState.random(int(rest))
        if kind == "random-real":
            return InitialState.random(int(rest), real_only=True)
        if kind == "explicit":
            amps = np.array([complex(z) for z in rest.split(",")])
            norm = np.linalg.norm(amps)
            if norm > 0 and abs(norm - 1.0) <= INPUT_ROUNDING:
                amps = amps / norm
            return InitialState.explicit(amps)
    except ValueError as exc:
        raise QwhitError(f"bad initial state {text!r}: {exc}") from None
    raise QwhitError(f"unknown initial state kind {kind!r}")


def coin_dict(coin: Coin) -> dict:
    return {
        "a": [coin.a.real, coin.a.imag],
        "b": [coin.b.real, coin.b.imag],
        "theta": coin.theta,
    }


def _emit(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _walk_args(p, need_init=True):
    p.add_argument("--n", type=int, help="lattice size; boundaries at 0 and n")
    p.add_argument("--coin", default="hadamard", help="hadamard | a=..,b=..,theta=..")
    if need_init:
        p.add_argument("--init", default="basis:1:L", help="initial state descriptor")


def _spec(args) -> WalkSpec:
    if args.n is None:
        raise QwhitError("--n is required")
    if args.n < 2:
        raise QwhitError("n must be ≥ 2")
    return WalkSpec(args.n, parse_coin(args.coin))


def _run_method(method, spec, init, args):
    """Returns (p0, iterations, residual, payload dict); may raise NotConvergedError."""
    if method == "iterate":
        res = hitting_prob_iterative(spec, init, eps=args.eps, max_steps=args.max_steps)
        payload = res.to_dict()
        if not res.converged:
            raise NotConvergedError(
                f"iteration stopped after {res.steps} steps with residual {res.residual:.3e}",
                partial=payload,
            )
        return res.p0, res.steps, res.residual, payload
    res = reduction.hitting_prob_direct(
        spec, init, solver=method, tol=args.tol, max_iters=args.max_iters
    )
    return res.p0, res.iterations, res.residual_norm, res.to_dict()


def cmd_hit(args) -> int:
    spec = _spec(args)
    init = parse_init(args.init)
    try:
        _, _, _, payload = _run_method(args.method, spec, init, args)
        code = EXIT_OK
    except NotConvergedError as exc:
        payload = exc.partial if isinstance(exc.partial, dict) else exc.partial.to_dict()
        print(f"qwhit: not converged: {exc}", file=sys.stderr)
        code = EXIT_NOT_CONVERGED
    payload["method"] = args.method
    _emit(_dump(payload), args.output)
    return code


def _sweep_one(coin, args):
    samples = numerics.sweep_kappa(coin, args.n_min, args.n_max, tol=args.tol, workers=args.workers)
    summary = {"coin": coin_dict(coin)}
    try:
        summary.update(numerics.fit_exponent(samples).to_dict())
    except QwhitError as exc:
        summary["fit_error"] = str(exc)
    summary["failures"] = [{"n": s.n, "error": s.error} for s in samples if not s.ok]
    return samples, summary


def _plot_data(samples) -> str:
    good = [s for s in samples if s.ok]
    ref_scale = good[-1].kappa / good[-1].n**2.5 if good else math.nan
    lines = ["# n kappa ref_n^2.5 (scaled to the last point)"]
    lines += [f"{s.n} {s.kappa:.16e} {ref_scale * s.n**2.5:.16e}" for s in good]
    return "\n".join(lines) + "\n"


def cmd_sweep_kappa(args) -> int:
    if not 3 <= args.n_min <= args.n_max:
        raise QwhitError("need 3 <= n-min <= n-max")
    if args.random_coins:
        rng = np.random.default_rng(args.seed)
        coins = [
            Coin.random(rng, 1 / math.sqrt(2), 1.0, constraint=args.constraint)
            for _ in range(args.random_coins)
        ]
    else:
        coins = [parse_coin(args.coin, args.constraint)]

    runs, total, ok = [], 0, 0
    for i, coin in enumerate(coins):
        samples, summary = _sweep_one(coin, args)
        total += len(samples)
        ok += sum(s.ok for s in samples)
        if args.csv and args.csv != "-":
            path = Path(args.csv)
            if len(coins) > 1:
                path = path.with_name(f"{path.stem}_coin{i}{path.suffix}")
            path.write_text(numerics.samples_to_csv(samples), encoding="utf-8")
        elif len(coins) == 1:
            sys.stdout.write(numerics.samples_to_csv(samples))
        if args.plot_data and len(coins) == 1:
            Path(args.plot_data).write_text(_plot_data(samples), encoding="utf-8")
        runs.append(summary)

    if len(coins) == 1:
        out = runs[0]
    else:
        out = {"seed": args.seed, "constraint": args.constraint, "coins": runs}
        out["failures"] = [f for r in runs for f in r["failures"]]
    _emit(_dump(out), args.output)
    if total and ok / total < 0.9:
        print(f"qwhit: only {ok}/{total} sweep points succeeded", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _hhl_config(args) -> hhl.HHLConfig:
    return hhl.HHLConfig(
        clock_qubits=args.clock,
        evolution_time=args.evolution_time,
        rotation_constant=args.rotation_constant,
        shots=args.shots,
        estimator=args.estimator,
        seed=args.seed,
    )


def cmd_compare(args) -> int:
    spec = _spec(args)
    init = parse_init(args.init)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - set(COMPARE_METHODS)
    if unknown:
        raise QwhitError(f"unknown methods {sorted(unknown)}")
    if "hhl" in methods:
        if spec.n > HHL_MAX_N:
            raise QwhitError(f"hhl budget: n ≤ {HHL_MAX_N}")
        if not init.is_real(spec.n):
            raise QwhitError("hhl needs a real-amplitude initial state")

    rows = []
    code = EXIT_OK
    for m in methods:
        start = time.perf_counter()
        try:
            if m == "hhl":
                out = hhl.q_hitting_prob(spec, init, _hhl_config(args))
                p0, iters, resid = out.p_estimate, out.shots_used, out.standard_error
            else:
                p0, iters, resid, _ = _run_method(m, spec, init, args)
        except NotConvergedError as exc:
            print(f"qwhit: {m} not converged: {exc}", file=sys.stderr)
            code = EXIT_NOT_CONVERGED
            p0, iters, resid = math.nan, 0, math.nan
        elapsed = time.perf_counter() - start
        rows.append({"method": m, "p0": p0, "wall_time": elapsed, "iterations": iters,
                     "residual": resid})

    for r in rows:
        bad = []
        for other in rows:
            if other is r:
                continue
            tol = HHL_AGREE_TOL if "hhl" in (r["method"], other["method"]) else AGREE_TOL
            if not abs(r["p0"] - other["p0"]) <= tol:
                bad.append(other["method"])
        r["disagrees_with"] = ";".join(bad)

    lines = ["method,p0,wall_time,iterations,residual,disagrees_with"]
    for r in rows:
        wall = f"{r['wall_time']:.6f}" if args.timing else ""
        lines.append(
            f"{r['method']},{r['p0']:.16e},{wall},{r['iterations']},"
            f"{r['residual']:.6e},{r['disagrees_with']}"
        )
    _emit("\n".join(lines) + "\n", args.output)
    return code


def cmd_hhl(args) -> int:
    spec = _spec(args)
    init = parse_init(args.init)
    cfg = _hhl_config(args)
    start = time.perf_counter()
    out = hhl.q_hitting_prob(spec, init, cfg)
    payload = out.to_dict()
    payload["config"] = {
        "n": spec.n,
        "coin": coin_dict(spec.coin),
        "init": args.init,
        "clock_qubits": cfg.clock_qubits,
        "shots": cfg.shots,
        "estimator": cfg.estimator,
        "seed": cfg.seed,
        "evolution_time": cfg.evolution_time,
        "rotation_constant": cfg.rotation_constant,
    }
    if args.timing:
        payload["wall_time"] = time.perf_counter() - start
    _emit(_dump(payload), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qwhit", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="flat JSON file of flag values")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def solver_args(p):
        p.add_argument("--eps", type=float, default=1e-10, help="iterate: stop below this residual")
        p.add_argument("--max-steps", type=int, default=1_000_000)
        p.add_argument("--tol", type=float, default=1e-13, help="cgnr/neumann relative residual")
        p.add_argument("--max-iters", type=int, default=None)

    def hhl_args(p):
        p.add_argument("--clock", type=int, default=8, help="clock qubits")
        p.add_argument("--shots", type=int, default=0, help="0 = exact amplitudes")
        p.add_argument("--estimator", default="hadamard-test", choices=hhl.ESTIMATORS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--evolution-time", type=float, default=None)
        p.add_argument("--rotation-constant", type=float, default=None)

    p = sub.add_parser("hit", help="hitting probability by one method")
    _walk_args(p)
    p.add_argument("--method", default="direct", choices=HIT_METHODS)
    solver_args(p)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_hit)

    p = sub.add_parser("sweep-kappa", help="condition number of I - M(x)M* versus n")
    p.add_argument("--coin", default="hadamard")
    p.add_argument("--constraint", default="unit", choices=("unit", "l1"),
                   help="coin normalization: |a|^2+|b|^2=1 (unit) or |a|+|b|=1 (l1)")
    p.add_argument("--n-min", type=int, default=3)
    p.add_argument("--n-max", type=int, default=60)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--random-coins", type=int, default=0,
                   help="batch mode: this many seeded random coins with |a| >= 1/sqrt(2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", default="-", help="CSV path ('-' = stdout)")
    p.add_argument("--plot-data", default=None, help="gnuplot column file")
    p.add_argument("--output", default="-", help="fit summary JSON path")
    p.set_defaults(func=cmd_sweep_kappa)

    p = sub.add_parser("compare", help="run several methods side by side")
    _walk_args(p)
    p.add_argument("--methods", default="iterate,direct,cgnr")
    solver_args(p)
    hhl_args(p)
    p.add_argument("--timing", action="store_true", help="fill the wall_time column")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("hhl", help="simulated HHL estimate")
    _walk_args(p)
    hhl_args(p)
    p.add_argument("--timing", action="store_true", help="add wall_time to the JSON")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_hhl)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise QwhitError(f"cannot read config: {exc}") from None
        if not isinstance(cfg, dict):
            raise QwhitError("config file must hold a flat JSON object")
        given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, val in cfg.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise QwhitError(f"unknown config key {key!r}")
            if attr not in given:
                setattr(args, attr, val)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except QwhitError as exc:
        print(f"qwhit: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotConvergedError as exc:
        print(f"qwhit: not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
