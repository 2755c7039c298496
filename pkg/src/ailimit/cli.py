"""Command-line entry point.

Exit codes: 0 success, 2 usage or validation error, 3 domain error,
4 continuation left its domain (StepUnderflow).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .continuation import (FullParams, Scheme, continue_in_epsilon, count_small_period,
                           min_pairwise_sup)
from .errors import AILimitError, InvalidBranch, StepUnderflow
from .hyperbolicity import certify
from .map3d import UNIT_BAND
from .relation import (FORWARD, BACKWARD, RelationCoeffs, branch_radicand, branches, fixed_points,
                       forward_branch, rescale_canonical, slope)
from .symbolic import (AIState, RegionQuery, SymbolWord, TrappingSet, ai_fixed_point,
                       closed_form_states, enumerate_periodic_states, min_pairwise_distance,
                       region_membership, unimodal_itinerary_orbit, unimodal_periodic_orbit)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_UNDERFLOW = 0, 2, 3, 4


class UsageError(Exception):
    """Flag validation failure (exit 2)."""


# --- output -----------------------------------------------------------------

def fmt(x) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def emit_json(obj, out=None):
    out = out or sys.stdout
    out.write(_encode(obj) + "\n")


# --- parsing helpers --------------------------------------------------------

def parse_grid(text: str, flag: str) -> np.ndarray:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"{flag}: expected lo:hi:step, got {text!r}") from None
    if not all(math.isfinite(v) for v in (lo, hi, step)) or step <= 0.0:
        raise UsageError(f"{flag}: bounds must be finite and step > 0")
    if hi < lo:
        raise UsageError(f"{flag}: empty grid (hi < lo)")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def parse_band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--band: expected lo:hi, got {text!r}") from None
    if not 0.0 <= lo <= 1.0 <= hi:
        raise UsageError("--band: need 0 <= lo <= 1 <= hi")
    return lo, hi


def parse_word(text: str) -> SymbolWord:
    if not text:
        raise UsageError("--word: must be a non-empty string over '+' and '-'")
    try:
        return SymbolWord.parse(text)
    except (InvalidBranch, ValueError) as exc:
        raise UsageError(f"--word: {exc}") from None


def parse_trapping(text: str) -> TrappingSet:
    try:
        return TrappingSet.parse(text)
    except ValueError as exc:
        raise UsageError(f"--B: {exc}") from None


def coeffs_from(args) -> RelationCoeffs:
    for name in ("alpha1", "sigma1", "a", "c"):
        if not math.isfinite(getattr(args, name)):
            raise UsageError(f"--{name}: must be finite")
    return RelationCoeffs(args.alpha1, args.sigma1, args.a, args.c)


def default_radius(coeffs: RelationCoeffs) -> float:
    fps = fixed_points(coeffs)
    return max([1.0] + [abs(u) for u in fps])


def default_trapping(coeffs: RelationCoeffs) -> TrappingSet:
    M = 1.5 * default_radius(coeffs)
    return TrappingSet.interval(-M, M)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("AILIMIT_THREADS", "1")))
    except ValueError:
        return 1


def state_json(state: AIState) -> dict:
    d = state.to_dict()
    d["certificate"] = certify(state).to_json()
    return d


# --- commands ---------------------------------------------------------------

def cmd_relation(args) -> int:
    coeffs = coeffs_from(args)
    if args.info:
        canon = rescale_canonical(coeffs)
        fps = fixed_points(coeffs)
        samples = []
        for u in fps:
            m = slope(coeffs, u, u)
            samples.append({"u": u, "v": u, "slope": m.to_json()})
        info = {"coeffs": coeffs.to_dict(), "canonical": canon.to_dict(), "fixed_points": fps,
                "slope_samples": samples}
        for direction in (FORWARD, BACKWARD):
            try:
                info[f"{direction}_branches"] = [s.value for s in branches(coeffs, direction)]
            except AILimitError as exc:
                info[f"{direction}_branches"] = exc.name
        emit_json(info)
        return EXIT_OK
    if args.samples < 1:
        raise UsageError("--samples: must be >= 1")
    if args.range:
        try:
            lo, hi = (float(v) for v in args.range.split(":"))
        except ValueError:
            raise UsageError("--range: expected lo:hi") from None
        if not hi > lo:
            raise UsageError("--range: need lo < hi")
    else:
        R = 2.0 * default_radius(coeffs)
        lo, hi = -R, R
    labels = branches(coeffs, FORWARD)
    dense = np.linspace(lo, hi, 40 * args.samples + 1)
    if labels[0].value == "0":
        ok = dense != 0.0
    else:
        ok = branch_radicand(coeffs, dense, FORWARD) >= 0.0
    valid = dense[ok]
    if valid.size == 0:
        from .errors import NegativeRadicand
        raise NegativeRadicand(f"no real branch values on [{lo:g}, {hi:g}]")
    us = valid[np.round(np.linspace(0, valid.size - 1, args.samples)).astype(int)]
    out = sys.stdout
    out.write("u,v,branch\n")
    for s in labels:
        vs = forward_branch(coeffs, s, us)
        for u, v in zip(us, np.atleast_1d(vs)):
            out.write(f"{fmt(u)},{fmt(v)},{s.value}\n")
    return EXIT_OK


def cmd_ai(args) -> int:
    modes = [args.word is not None, args.closed_form is not None, args.unimodal is not None,
             args.enumerate is not None]
    if sum(modes) != 1:
        raise UsageError("choose exactly one of --word, --closed-form, --unimodal, --enumerate")
    if args.closed_form is not None:
        if args.period is None or args.period < 1:
            raise UsageError("--period: must be >= 1")
        states = closed_form_states(args.closed_form, args.period)
        emit_json({"count": len(states), "states": [state_json(s) for s in states]})
        return EXIT_OK
    if args.unimodal is not None:
        if not 0.0 < args.unimodal < 1.0:
            raise UsageError("--unimodal: cbar must lie in (0, 1)")
        if args.itinerary:
            state = unimodal_itinerary_orbit(args.unimodal, args.itinerary)
        else:
            if args.period is None or args.period < 1 or args.seed is None:
                raise UsageError("--unimodal needs --itinerary or both --period and --seed")
            state = unimodal_periodic_orbit(args.unimodal, args.period, args.seed)
        emit_json(state_json(state))
        return EXIT_OK
    coeffs = coeffs_from(args)
    B = parse_trapping(args.B) if args.B else default_trapping(coeffs)
    if args.enumerate is not None:
        if not 1 <= args.enumerate <= 16:
            raise UsageError("--enumerate: period must be in [1, 16]")
        states = enumerate_periodic_states(coeffs, args.enumerate, B, tol=args.tol, workers=threads())
        emit_json({"count": len(states), "min_pairwise_distance": min_pairwise_distance(states),
                   "states": [state_json(s) for s in states]})
        return EXIT_OK
    word = parse_word(args.word)
    state = ai_fixed_point(coeffs, word, B, max_iter=args.max_iter, tol=args.tol)
    emit_json(state_json(state))
    return EXIT_OK


def _load_state(args, coeffs) -> AIState:
    given = [args.word is not None, args.xi is not None, args.state is not None]
    if sum(given) != 1:
        raise UsageError("choose exactly one of --word, --xi, --state")
    if args.state is not None:
        try:
            with open(args.state) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--state: {exc}") from None
        if "states" in data:
            data = data["states"][0]
        return AIState.from_dict(data)
    if args.xi is not None:
        try:
            vals = [float(v) for v in args.xi.split(",")]
        except ValueError:
            raise UsageError("--xi: expected comma-separated numbers") from None
        return AIState.from_values(coeffs, vals)
    word = parse_word(args.word)
    B = parse_trapping(args.B) if args.B else default_trapping(coeffs)
    return ai_fixed_point(coeffs, word, B)


def cmd_continue(args) -> int:
    if not (math.isfinite(args.epsilon) and args.epsilon > 0.0):
        raise UsageError("--epsilon: must be > 0")
    if args.steps < 1:
        raise UsageError("--steps: must be >= 1")
    if not args.tol > 0.0:
        raise UsageError("--tol: must be > 0")
    band = parse_band(args.band)
    coeffs = coeffs_from(args)
    state = _load_state(args, coeffs)
    coeffs = state.coeffs
    target = FullParams(args.epsilon, coeffs.alpha1, coeffs.sigma1, 0.0, coeffs.a, coeffs.c,
                        Scheme(args.delta, args.sigma_slope, args.alpha_slope))
    sol = continue_in_epsilon(state, target, steps=args.steps, tol=args.tol)
    cert = certify(state)
    sol.certificate = cert.to_json()
    out = sol.to_json()
    orbit_res = sol.orbit_residual
    checks = {
        "residual": sol.residual <= args.tol,
        "orbit_residual": orbit_res <= args.orbit_tol,
        "monodromy_band": sol.spectrum.outside_band(band),
    }
    out["orbit_residual"] = orbit_res
    out["band"] = list(band)
    out["checks"] = checks
    emit_json(out)
    failed = [k for k, v in checks.items() if not v]
    if failed:
        print(f"error: VerificationFailed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def _region_row(args, r, a, c, B, q):
    coeffs = RelationCoeffs(args.alpha_sign, r, a, c)
    try:
        res = region_membership(coeffs, B, q)
        return f"{fmt(r)},{fmt(a)},{fmt(c)},{str(res.member).lower()},{fmt(res.margin)}"
    except AILimitError:
        return f"{fmt(r)},{fmt(a)},{fmt(c)},false,nan"


def cmd_scan(args) -> int:
    out = sys.stdout
    if args.mode == "region":
        rs = parse_grid(args.r, "--r")
        as_ = parse_grid(args.a_grid, "--a-grid")
        cs = parse_grid(args.c_grid, "--c-grid")
        if args.n < 1 or not args.lam > 1.0:
            raise UsageError("--n must be >= 1 and --lam > 1")
        if args.alpha_sign not in (-1.0, 1.0):
            raise UsageError("--alpha-sign: must be -1 or 1")
        B = parse_trapping(args.B)
        q = RegionQuery(args.n, args.lam, args.direction, args.grid_points)
        cells = [(r, a, c) for r in rs for a in as_ for c in cs]
        with ThreadPoolExecutor(threads()) as pool:
            rows = list(pool.map(lambda cell: _region_row(args, *cell, B, q), cells))
        out.write("r,a,c,member,margin\n")
        for row in rows:
            out.write(row + "\n")
        return EXIT_OK
    eps_grid = parse_grid(args.epsilon_grid, "--epsilon-grid")
    if np.any(eps_grid <= 0.0):
        raise UsageError("--epsilon-grid: values must be > 0")
    coeffs = coeffs_from(args)

    def row(eps):
        e = FullParams(float(eps), coeffs.alpha1, coeffs.sigma1, 0.0, coeffs.a, coeffs.c,
                       Scheme(args.delta, args.sigma_slope, args.alpha_slope))
        n1, n2 = count_small_period(e)
        return f"{fmt(eps)},{n1},{n2}"

    with ThreadPoolExecutor(threads()) as pool:
        rows = list(pool.map(row, eps_grid))
    out.write("epsilon,n_period1,n_period2_true\n")
    for r in rows:
        out.write(r + "\n")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _coeff_flags(p, alpha1=0.0, sigma1=0.0, a=1.0, c=0.0):
    p.add_argument("--alpha1", type=float, default=alpha1)
    p.add_argument("--sigma1", type=float, default=sigma1)
    p.add_argument("--a", type=float, default=a)
    p.add_argument("--c", type=float, default=c)


def _scheme_flags(p):
    p.add_argument("--delta", type=float, default=0.0, help="Jacobian determinant of the 3D map")
    p.add_argument("--sigma-slope", type=float, default=0.0)
    p.add_argument("--alpha-slope", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ailimit", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("--config", help="file of 'key = value' lines; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"allow_abbrev": False}

    p = sub.add_parser("relation", help="sample or describe the limit relation", **sub_kw)
    _coeff_flags(p)
    p.add_argument("--samples", type=int, default=100, help="points per branch")
    p.add_argument("--range", help="u range lo:hi")
    p.add_argument("--info", action="store_true", help="JSON summary instead of CSV")
    p.set_defaults(func=cmd_relation)

    p = sub.add_parser("ai", help="construct AI states", **sub_kw)
    _coeff_flags(p)
    p.add_argument("--word")
    p.add_argument("--B", help="trapping set lo:hi[,lo:hi...]")
    p.add_argument("--closed-form", choices=["square-one", "zero-minus-one"])
    p.add_argument("--unimodal", type=float, metavar="CBAR")
    p.add_argument("--itinerary", help="L/R itinerary for --unimodal")
    p.add_argument("--period", type=int)
    p.add_argument("--seed", type=float)
    p.add_argument("--enumerate", type=int, metavar="PERIOD")
    p.add_argument("--tol", type=float, default=1e-14)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.set_defaults(func=cmd_ai)

    p = sub.add_parser("continue", help="continue an AI state to eps > 0", **sub_kw)
    _coeff_flags(p)
    _scheme_flags(p)
    p.add_argument("--word")
    p.add_argument("--xi", help="comma-separated AI state values")
    p.add_argument("--state", help="AI state JSON file (output of 'ai')")
    p.add_argument("--B")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--orbit-tol", type=float, default=1e-8)
    p.add_argument("--band", default=f"{UNIT_BAND[0]}:{UNIT_BAND[1]}")
    p.set_defaults(func=cmd_continue)

    p = sub.add_parser("scan", help="parameter scans", **sub_kw)
    p.add_argument("--mode", choices=["region", "period2"], required=True)
    _coeff_flags(p)
    _scheme_flags(p)
    p.add_argument("--r", default="0:0:1", help="grid lo:hi:step")
    p.add_argument("--a-grid", default="1:1:1")
    p.add_argument("--c-grid", default="0:0:1")
    p.add_argument("--alpha-sign", type=float, default=-1.0)
    p.add_argument("--B", default="-1.3:1.3")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--lam", type=float, default=1.05)
    p.add_argument("--direction", choices=[FORWARD, BACKWARD], default=FORWARD)
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--epsilon-grid", default="0.1:0.9:0.1")
    p.set_defaults(func=cmd_scan)
    return parser


def read_config(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"--config: line {n} is not 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            pairs.append((k.replace("_", "-"), v))
    return pairs


def _config_argv(parser, argv: list[str]) -> list[str]:
    """Splice config-file entries in front of the subcommand flags."""
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        pairs = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"--config: {exc}") from None
    if not rest:
        return rest
    cmd, flags = rest[0], rest[1:]
    subparser = parser._subparsers._group_actions[0].choices.get(cmd)
    if subparser is None:
        return rest
    extra = []
    for k, v in pairs:
        action = subparser._option_string_actions.get(f"--{k}")
        if action is None:
            raise UsageError(f"--config: unknown key {k!r} for '{cmd}'")
        if action.nargs == 0:
            if v.lower() in ("1", "true", "yes", "on"):
                extra.append(f"--{k}")
        else:
            extra.append(f"--{k}={v}")
    return [cmd] + extra + flags


FLAG_OPTIONS = {"--info", "-h", "--help"}


def _attach_dash_values(argv: list[str]) -> list[str]:
    """Turn ``--B -1:1`` or ``--word -+`` into ``--B=-1:1`` so values may start with '-'."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith("--") and "=" not in tok and tok not in FLAG_OPTIONS and nxt is not None
                and nxt.startswith("-") and not nxt.startswith("--") and len(nxt) > 1):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = _attach_dash_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        argv = _config_argv(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_USAGE if exc.code else EXIT_OK
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StepUnderflow as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_UNDERFLOW
    except AILimitError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
