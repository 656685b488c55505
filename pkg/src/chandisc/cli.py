"""Command-line front end: JSON configs in, JSON or CSV reports out.

Exit codes: 0 ok, 2 config/schema error, 3 dimension mismatch,
4 solver precondition failed, 5 size cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from typing import Optional

import numpy as np

from . import __version__
from .channel_div import (DimensionBlowUp, classical_channel_divergence, dmax_channel,
                          quantum_channel_divergence_lower, regularized_bracket)
from .core import ClassicalChannel, DimensionError, ProbVector, TestOperator
from .divergences import (dh_classical, dh_quantum, dmax, dmax_classical, kl_divergence,
                          measured_relative_entropy_lower, quantum_relative_entropy)
from .exponents import (HypothesisSet, PreconditionError, convex_classical_exponent,
                        level_n_hull_bracket, parallel_exponent_finite_classical,
                        worst_case_iid_exponent)
from .optim import CAP, LPError
from .protocols import (DEFAULT_EPS, DEFAULT_SAMPLES, AdaptivePolicy, HypothesisFamily,
                        SizeCapError, adversary_best_response, alternating_inputs,
                        estimate_exponent, evaluate_adaptive_strategy,
                        evaluate_parallel_strategy, example12, simulate_adaptive_mc,
                        universal_adversarial_test)
from .serialization import (ConfigError, config_hash, dumps, parse_channel, parse_config_text,
                            parse_real, parse_state, to_jsonable)

EXIT_OK, EXIT_SCHEMA, EXIT_DIMENSION, EXIT_PRECONDITION, EXIT_SIZE = 0, 2, 3, 4, 5

CSV_COLUMNS = {
    "divergence": ["divergence", "value", "infinite"],
    "channel-div": ["quantity", "lower", "upper"],
    "exponent": ["instance", "value", "lower", "upper"],
    "simulate": ["n", "alpha", "beta", "exponent_estimate", "ci_low", "ci_high"],
    "adversary": ["n", "value", "type_ii_exponent"],
    "example12": ["quantity", "value"],
}

EPILOG = """\
CSV columns (fixed):
  divergence   divergence,value,infinite
  channel-div  quantity,lower,upper
  exponent     instance,value,lower,upper
  simulate     n,alpha,beta,exponent_estimate,ci_low,ci_high
               followed by '# slope,<value>' and '# r_squared,<value>' lines
  adversary    n,value,type_ii_exponent
  example12    quantity,value

Exit codes: 0 ok, 2 config/schema, 3 dimension, 4 solver precondition, 5 size cap.
"""


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _parse_n_list(text: str) -> list[int]:
    """'8,10,12' or '8:16' (inclusive) or '8:16:2'."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            return list(range(lo, hi + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n-list {text!r}") from None


def _effective_config(args, kind: str) -> dict:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read(), args.config)
        if cfg["kind"] != kind:
            raise ConfigError(f"{args.config}: field kind: config is {cfg['kind']!r}, "
                              f"command is {kind!r}")
    elif kind == "example12":
        cfg = {"version": "1", "kind": "example12"}
    else:
        raise ConfigError(f"the {kind} command needs --config")
    params = dict(cfg.get("params", {}))
    for flag, key in (("eps", "eps"), ("n", "n"), ("restarts", "restarts"), ("seed", "seed"),
                      ("cap", "cap"), ("samples", "samples")):
        val = getattr(args, flag)
        if val is not None:
            params[key] = val
    if args.n_list is not None:
        params["n_list"] = args.n_list
    if args.monte_carlo:
        params["monte_carlo"] = True
    cfg = dict(cfg)
    cfg["params"] = params
    return cfg


def _param(cfg, key, default):
    v = cfg["params"].get(key, default)
    return parse_real(v) if key in ("eps", "cap") and v is not None else v


def _lookup(table: dict, name: str, what: str):
    if name not in table:
        raise ConfigError(f"field {what}: unknown name {name!r}")
    return table[name]


def _channels(cfg) -> dict:
    return {k: parse_channel(v) for k, v in cfg.get("channels", {}).items()}


def _hypotheses(cfg) -> tuple[HypothesisSet, HypothesisSet, dict]:
    if cfg.get("use_example12"):
        s, t, _ = example12()
        return s, t, {"s": {}, "t": {}}
    if "hypotheses" not in cfg:
        raise ConfigError("field hypotheses: required for this command")
    chans = _channels(cfg)
    out = []
    for side in ("s", "t"):
        block = cfg["hypotheses"][side]
        verts = tuple(_lookup(chans, v, f"hypotheses/{side}/vertices") for v in block["vertices"])
        out.append(HypothesisSet(verts, take_hull=block.get("take_hull", False)))
    return out[0], out[1], cfg["hypotheses"]


def _families(cfg):
    s, t, blocks = _hypotheses(cfg)
    fams = []
    for h, side in ((s, "s"), (t, "t")):
        b = blocks.get(side, {})
        eps = parse_real(b.get("epsilon", 0.0))
        fams.append(HypothesisFamily(h, kind=b.get("family_kind", "iid"), epsilon=eps))
    return fams[0], fams[1]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_divergence(cfg) -> dict:
    which = cfg.get("divergence")
    if which is None:
        raise ConfigError("field divergence: required")
    states = {k: parse_state(v) for k, v in cfg.get("states", {}).items()}
    rho = _lookup(states, cfg["params"].get("rho", "rho"), "params/rho")
    sigma = _lookup(states, cfg["params"].get("sigma", "sigma"), "params/sigma")
    if type(rho) is not type(sigma):
        raise DimensionError("states must both be classical or both quantum")
    classical = isinstance(rho, ProbVector)
    eps = _param(cfg, "eps", 0.1)
    cert: dict = {}
    if which == "kl":
        value = kl_divergence(rho, sigma) if classical else quantum_relative_entropy(rho, sigma)
    elif which == "quantum":
        value = quantum_relative_entropy(rho.to_density() if classical else rho,
                                         sigma.to_density() if classical else sigma)
    elif which == "dmax":
        value = dmax_classical(rho, sigma) if classical else dmax(rho, sigma)
    elif which == "dh":
        value, test = (dh_classical if classical else dh_quantum)(rho, sigma, eps)
        cert = {"threshold": test.threshold, "inner_fraction": test.inner_fraction,
                "achieved_alpha": test.achieved_alpha, "achieved_beta": test.achieved_beta,
                "test": test.test.values, "eps": eps}
    else:
        r = rho.to_density() if classical else rho
        s = sigma.to_density() if classical else sigma
        value, povm = measured_relative_entropy_lower(
            r, s, restarts=_param(cfg, "restarts", 8), seed=_param(cfg, "seed", 0))
        cert = {"povm": [e for e in povm.elements]}
    return {"divergence": which, "value": value, "infinite": math.isinf(value),
            "certificate": cert}


def cmd_channel_div(cfg) -> dict:
    which = cfg.get("channel_div", "bracket")
    chans = _channels(cfg)
    e = _lookup(chans, cfg["params"].get("e", "e"), "params/e")
    f = _lookup(chans, cfg["params"].get("f", "f"), "params/f")
    restarts, seed = _param(cfg, "restarts", 32), _param(cfg, "seed", 0)
    if which == "classical":
        if not (isinstance(e, ClassicalChannel) and isinstance(f, ClassicalChannel)):
            raise PreconditionError("classical channel divergence needs classical channels")
        v = classical_channel_divergence(e, f)
        return {"quantity": which, "lower": v, "upper": v, "per_n_values": {}}
    if which == "dmax":
        v = dmax_channel(e, f)
        return {"quantity": which, "lower": v, "upper": v, "per_n_values": {}}
    fn = quantum_channel_divergence_lower if which == "lower" else regularized_bracket
    rep = fn(e, f, restarts=restarts, seed=seed)
    return {"quantity": which, "lower": rep.lower, "upper": rep.upper,
            "per_n_values": rep.per_n_values, "witness_state": rep.witness_state}


def _exponent_dict(name, rep) -> dict:
    return {"instance": name, "value": rep.value, "lower": rep.lower, "upper": rep.upper,
            "input_certificate": rep.input_certificate, "pair_certificate": rep.pair_certificate,
            "duality_gap": rep.duality_gap, "capped": rep.capped}


def cmd_exponent(cfg) -> dict:
    which = cfg.get("exponent")
    if which is None:
        raise ConfigError("field exponent: required")
    s, t, _ = _hypotheses(cfg)
    restarts, seed = _param(cfg, "restarts", 8), _param(cfg, "seed", 0)
    if which == "parallel-finite":
        rep = parallel_exponent_finite_classical(s, t, cap=_param(cfg, "cap", CAP))
    elif which == "convex":
        rep = convex_classical_exponent(s, t)
    elif which == "iid-bound":
        rep = worst_case_iid_exponent(s, t, restarts=restarts, seed=seed)
    else:
        rep = level_n_hull_bracket(s, t, n=_param(cfg, "n", 1), restarts=restarts, seed=seed)
    return _exponent_dict(which, rep)


def _policy_from_table(table: dict, n_x: int, n_y: int) -> AdaptivePolicy:
    parsed = {}
    for key, x in table.items():
        hist = tuple(int(p) for p in key.split(",") if p.strip()) if key.strip() else ()
        parsed[hist] = int(x)
    return AdaptivePolicy.from_table(parsed, n_x, n_y)


def _strategy_inputs(choice, n: int):
    if choice == "alternating":
        return alternating_inputs(n)
    if isinstance(choice, int):
        return choice
    if isinstance(choice, list) and choice and not any(isinstance(v, list) for v in choice) and \
            all(isinstance(v, int) for v in choice):
        if len(choice) != n:
            raise ConfigError(f"field strategy/input: {len(choice)} inputs for n = {n}")
        return list(choice)
    if isinstance(choice, list) and choice and not any(isinstance(v, list) for v in choice):
        return ProbVector(np.array([parse_real(v) for v in choice]))
    return [v if isinstance(v, int) else ProbVector(np.array([parse_real(u) for u in v]))
            for v in choice]


def cmd_simulate(cfg) -> dict:
    s, t = _families(cfg)
    strategy = cfg.get("strategy")
    if strategy is None:
        raise ConfigError("field strategy: required")
    eps = _param(cfg, "eps", DEFAULT_EPS)
    n_list = _param(cfg, "n_list", None) or [_param(cfg, "n", 8)]
    mc = bool(_param(cfg, "monte_carlo", False))
    samples = _param(cfg, "samples", DEFAULT_SAMPLES)
    seed = _param(cfg, "seed", 0)
    n_x, n_y = s.base.shape
    policy = None
    if strategy["type"] == "adaptive":
        pol = strategy.get("policy", "example12-canonical")
        if pol == "example12-canonical":
            if (n_x, n_y) != (2, 4):
                raise DimensionError("the canonical example policy needs 2 inputs and 4 outputs")
            policy = example12()[2]
        else:
            policy = _policy_from_table(pol, n_x, n_y)
    rows, betas = [], {}
    for n in n_list:
        try:
            if policy is not None:
                pair = evaluate_adaptive_strategy(policy, s, t, n, eps)
            else:
                pair, _ = evaluate_parallel_strategy(
                    s, t, _strategy_inputs(strategy.get("input", 0), n), n, eps)
            lo = hi = pair.exponent
            alpha, beta = pair.alpha, pair.beta
        except SizeCapError:
            if not mc:
                raise
            if policy is not None:
                run_policy = policy
            else:
                inp = _strategy_inputs(strategy.get("input", 0), n)
                run_policy = (AdaptivePolicy.from_sequence(inp, n_x, n_y)
                              if isinstance(inp, list) else AdaptivePolicy.constant(inp, n_x, n_y))
            res = simulate_adaptive_mc(run_policy, s, t, n, eps, samples=samples, seed=seed)
            alpha, beta = res.alpha, res.beta
            lo = -math.log2(res.ci_high) / n if res.ci_high > 0 else math.inf
            hi = -math.log2(res.ci_low) / n if res.ci_low > 0 else math.inf
        exponent = -math.log2(beta) / n if beta > 0 else math.inf
        rows.append({"n": n, "alpha": alpha, "beta": beta, "exponent_estimate": exponent,
                     "ci_low": lo, "ci_high": hi})
        betas[n] = beta
    report = {"rows": rows, "eps": eps}
    fit_ns = [n for n in betas if n >= 8 and betas[n] > 0]
    if len(fit_ns) >= 3:
        slope, r2 = estimate_exponent(betas, n_min=8)
        report.update(slope=slope, r_squared=r2)
    elif len([n for n in betas if betas[n] > 0]) >= 3:
        slope, r2 = estimate_exponent(betas, n_min=min(betas))
        report.update(slope=slope, r_squared=r2)
    return report


def _policy_digest(policy) -> str:
    blob = b"".join(np.ascontiguousarray(c, dtype=np.int64).tobytes() for c in policy.choices)
    return hashlib.sha256(blob).hexdigest()


def cmd_adversary(cfg) -> dict:
    block = cfg.get("adversary")
    if block is None:
        raise ConfigError("field adversary: required")
    q = [ProbVector(np.array([parse_real(v) for v in row])) for row in block["q"]]
    n = _param(cfg, "n", 1)
    eps = _param(cfg, "eps", DEFAULT_EPS)
    out: dict = {"n": n}
    if block.get("universal"):
        if "p" not in block:
            raise ConfigError("field adversary/p: required for the universal test")
        p = [ProbVector(np.array([parse_real(v) for v in row])) for row in block["p"]]
        u = universal_adversarial_test(p, q, n, eps)
        region = u.test
        out.update(radius=u.radius, boundary_fraction=u.boundary_fraction, alpha=u.alpha)
    else:
        if "region" not in block:
            raise ConfigError("field adversary/region: required unless universal is true")
        region = TestOperator(np.array([parse_real(v) for v in block["region"]]))
    value, policy = adversary_best_response(region, q, n)
    table = policy.table(depth=4)
    out.update(value=value,
               type_ii_exponent=(-math.log2(value) / n if value > 0 else math.inf),
               policy={",".join(map(str, h)): v for h, v in table.items()},
               policy_truncated=n > 4, policy_sha256=_policy_digest(policy))
    return out


def cmd_example12(cfg) -> dict:
    s, t, policy = example12()
    iid = worst_case_iid_exponent(s, t)
    par = parallel_exponent_finite_classical(s, t)
    out = {"iid_bound": iid.value, "parallel": par.value,
           "parallel_weights": par.input_certificate, "ratio": iid.value / par.value}
    n_list = cfg["params"].get("n_list")
    if n_list:
        eps = _param(cfg, "eps", DEFAULT_EPS)
        fs, ft = HypothesisFamily(s), HypothesisFamily(t)
        rows, ad, pa = [], {}, {}
        for n in n_list:
            a = evaluate_adaptive_strategy(policy, fs, ft, n, eps)
            p, _ = evaluate_parallel_strategy(fs, ft, alternating_inputs(n), n, eps)
            rows.append({"n": n, "adaptive_beta": a.beta, "adaptive_exponent": a.exponent,
                         "parallel_beta": p.beta, "parallel_exponent": p.exponent})
            ad[n], pa[n] = a.beta, p.beta
        out["rows"] = rows
        if len([n for n in n_list if n >= 8]) >= 3:
            out["adaptive_slope"], out["adaptive_r_squared"] = estimate_exponent(ad, 8)
            out["parallel_slope"], out["parallel_r_squared"] = estimate_exponent(pa, 8)
    return out


COMMANDS = {
    "divergence": cmd_divergence,
    "channel-div": cmd_channel_div,
    "exponent": cmd_exponent,
    "simulate": cmd_simulate,
    "adversary": cmd_adversary,
    "example12": cmd_example12,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _csv_text(kind: str, report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS[kind]
    w.writerow(cols)
    plain = to_jsonable(report)
    if kind == "simulate":
        for row in plain["rows"]:
            w.writerow([row[c] for c in cols])
        if "slope" in plain:
            w.writerow(["# slope", plain["slope"]])
            w.writerow(["# r_squared", plain["r_squared"]])
    elif kind == "example12":
        for key in ("iid_bound", "parallel", "ratio"):
            w.writerow([key, plain[key]])
    else:
        w.writerow([plain.get(c, "") for c in cols])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON problem config")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, help="64-bit RNG seed")
    common.add_argument("--eps", type=float, help="type-I error budget")
    common.add_argument("--n", type=int, help="number of channel uses / samples")
    common.add_argument("--n-list", type=_parse_n_list, dest="n_list",
                        help="list of n: '8,10,12' or inclusive range '8:16[:step]'")
    common.add_argument("--restarts", type=int)
    common.add_argument("--cap", type=float, help="finite stand-in for +inf inside LPs")
    common.add_argument("--monte-carlo", action="store_true", dest="monte_carlo",
                        help="fall back to sampling above the exact-evaluation cap")
    common.add_argument("--samples", type=int, help="Monte Carlo samples per hypothesis member")

    parser = argparse.ArgumentParser(
        prog="chandisc", description="Composite channel discrimination toolkit.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"chandisc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "divergence": "state divergences (kl, quantum, dmax, dh, dm-lower)",
        "channel-div": "channel divergences and regularized brackets",
        "exponent": "Stein exponents (parallel-finite, convex, iid-bound, level-n)",
        "simulate": "exact or Monte Carlo error evaluation of a strategy over n",
        "adversary": "best-response adversary for a test region or the universal test",
        "example12": "built-in two-pair example: analytic values and optional simulation",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text, epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return parser


def run(argv: Optional[list] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    kind = args.command
    try:
        cfg = _effective_config(args, kind)
        report = COMMANDS[kind](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_SCHEMA
    except DimensionBlowUp as exc:
        print(f"size cap: {exc}", file=stderr)
        return EXIT_SIZE
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=stderr)
        return EXIT_DIMENSION
    except (PreconditionError, LPError) as exc:
        print(f"solver precondition: {exc}", file=stderr)
        return EXIT_PRECONDITION
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_SCHEMA
    seed = cfg["params"].get("seed", 0)
    report = {"tool_version": __version__, "config_hash": config_hash(cfg), "seed": seed,
              "command": kind, **report}
    text = dumps(report) if args.format == "json" else _csv_text(kind, report)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
