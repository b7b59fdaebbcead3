"""Command-line front end.

Exit codes: 0 success (feasible / synchronized), 2 infeasible or not
synchronized, 1 usage or input error.
"""
import argparse
import math
import sys

from .config import (
    ConfigError,
    bisection_tol,
    build_coupling,
    build_graph,
    build_system,
    load_config,
    require,
    solver_options,
    sweep_params,
)
from .graph import GraphError, TorusSpec, spectra, torus_extreme_eigs, torus_graph
from .linalg import LinAlgError
from .margin import (
    DeterministicallyInfeasible,
    MarginError,
    critical_cod,
    optimal_k,
    small_gain_for_graph,
    sweep_csv,
    torus_sweep,
)
from .prl import (
    InputError,
    check_full_sync_condition,
    check_reduced_sync_condition,
    check_torus_matrix_condition,
)
from .simulator import NetworkSimConfig, simulate

OK, INFEASIBLE, INPUT_ERROR = 0, 2, 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _out(msg=""):
    print(msg, flush=True)


def _model(cfg):
    require(cfg, "system", "graph", "coupling")
    sys_, nl = build_system(cfg)
    return sys_, nl, build_coupling(cfg, sys_), build_graph(cfg)


def _torus_stats(cfg):
    t = cfg.graph["torus"]
    return t["mu"], t["sigma_sq"]


def _analysis_graph(cfg, g):
    """Graph used by the edge-based checks; torus configs are materialised."""
    if isinstance(g, TorusSpec):
        mu, s2 = _torus_stats(cfg)
        g = torus_graph(g, mu, s2)
    gb = cfg.analysis.get("gamma_bar")
    return g if gb is None else g.with_cod(gb)


def _spectra_line(sp):
    return (
        f"spectra: lambda_2={sp.lambda2:.6g} lambda_N={sp.lambdaN:.6g} "
        f"lambda_2d={sp.lambda2_d:.6g} lambda_Nu={sp.lambdaN_u:.6g} "
        f"tau={sp.tau:.6g} gamma_bar={sp.gamma_bar:.6g}"
    )


def cmd_analyze(cfg, args):
    sys_, _, G, g = _model(cfg)
    opts = solver_options(cfg)
    is_torus = isinstance(g, TorusSpec)
    checks = cfg.analysis.get("checks") or (["torus"] if is_torus else ["full", "reduced"])
    if "torus" in checks and not is_torus:
        raise ConfigError(f"{cfg.source}: analysis.checks: the torus check needs a torus graph")
    sp = None
    if not is_torus or any(c != "torus" for c in checks):
        ga = _analysis_graph(cfg, g)
        sp = spectra(ga)
        _out(_spectra_line(sp))
    else:
        lam2, lamN = torus_extreme_eigs(g)
        mu, s2 = _torus_stats(cfg)
        _out(f"spectra: lambda_2={lam2:.6g} lambda_N={lamN:.6g} mu={mu:.6g} sigma_sq={s2:.6g} (shared link noise)")
    all_ok = True
    for name in checks:
        if name == "full":
            cert = check_full_sync_condition(ga, sys_, G, opts)
        elif name == "reduced":
            cert = check_reduced_sync_condition(sys_, G, sp, opts=opts)
        else:
            mu, s2 = _torus_stats(cfg)
            if cfg.analysis.get("gamma_bar") is not None:
                s2 = cfg.analysis["gamma_bar"] * mu
            cert = check_torus_matrix_condition(g, sys_, G, mu, s2, opts)
        all_ok &= cert.feasible
        _out(f"{name}: {cert.summary()}")
    return OK if all_ok else INFEASIBLE


def cmd_margin(cfg, args):
    sys_, _, G, g = _model(cfg)
    opts = solver_options(cfg)
    ga = _analysis_graph(cfg, g)
    s2 = cfg.analysis.get("sigma_sq")
    margins = cfg.analysis.get("margins") or (["small_gain", "critical_cod"] if s2 is not None else ["critical_cod"])
    code = OK
    sp = spectra(ga)
    _out(_spectra_line(sp))
    for name in margins:
        if name == "small_gain":
            if s2 is None:
                raise ConfigError(f"{cfg.source}: analysis.sigma_sq: required for the small-gain margin")
            ref = cfg.analysis.get("reference_sigma_sq")
            try:
                cert, sg = small_gain_for_graph(ga, sys_, G, s2, ref, opts)
            except MarginError as exc:
                _out(f"small_gain: not applicable ({exc})")
                code = INFEASIBLE
                continue
            if sg is None:
                _out(f"small_gain: synchronization Riccati infeasible at the reference variance ({cert.binding_condition})")
                code = INFEASIBLE
                continue
            _out(
                f"small_gain: rho={sg.rho:.6g} sigma_sq_critical={sg.sigma_critical_sq:.6g} "
                f"sigma_sq={sg.sigma_sq:.6g} holds={'true' if sg.holds else 'false'}"
            )
            if not sg.holds:
                code = INFEASIBLE
        else:
            try:
                gc = critical_cod(sys_, G, sp, tol=bisection_tol(cfg), opts=opts)
            except DeterministicallyInfeasible:
                _out("critical_cod: deterministically infeasible (the condition fails at zero dispersion)")
                code = INFEASIBLE
                continue
            if math.isinf(gc):
                _out("critical_cod: inf (condition still holds at the bisection cap)")
            else:
                _out(f"critical_cod: gamma_bar_c={gc:.3f}")
    return code


def cmd_torus(cfg, args):
    require(cfg, "torus_sweep")
    p, N, ks, ds = sweep_params(cfg)
    rows = torus_sweep(p, N, ks, ds, threads=args.threads)
    text = sweep_csv(rows)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        _out(f"wrote {len(rows)} cells to {args.csv}")
    else:
        sys.stdout.write(text)
    _out("d,optimal_k")
    for d, k in optimal_k(rows).items():
        _out(f"{d},{'none' if k is None else k}")
    return OK


def cmd_simulate(cfg, args):
    require(cfg, "sim")
    sys_, nl, G, g = _model(cfg)
    s = dict(cfg.sim)
    if args.seed is not None:
        s["seed"] = args.seed
    kw = {}
    if isinstance(g, TorusSpec):
        mu, s2 = _torus_stats(cfg)
        if "gamma_bar_factor" in s:
            raise ConfigError(f"{cfg.source}: sim.gamma_bar_factor: only supported for edge-list and ring graphs")
        if "gamma_bar" in s:
            s2 = s["gamma_bar"] * mu
        kw = {"torus_mu": mu, "torus_sigma_sq": s2}
    else:
        gb = s.get("gamma_bar")
        if "gamma_bar_factor" in s:
            gc = critical_cod(sys_, G, spectra(g), tol=bisection_tol(cfg), opts=solver_options(cfg))
            if math.isinf(gc):
                raise ConfigError(f"{cfg.source}: sim.gamma_bar_factor: the critical CoD is unbounded")
            gb = s["gamma_bar_factor"] * gc
            _out(f"critical_cod: gamma_bar_c={gc:.3f}; simulating at gamma_bar={gb:.6g}")
        if gb is not None:
            g = g.with_cod(gb)
    sc = NetworkSimConfig(
        system=sys_,
        nonlinearity=nl,
        graph=g,
        G=G,
        noise=s["noise"],
        additive_noise=s["additive_noise"],
        horizon=s["horizon"],
        trials=s["trials"],
        seed=s["seed"],
        init_center=s.get("init_center"),
        init_spread=s["init_spread"],
        **kw,
    )
    tr = simulate(sc, threads=args.threads)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(tr.to_csv())
    _out(f"K_hat={tr.K_hat:.6g}")
    _out(f"beta_hat={tr.beta_hat:.6g}")
    _out(f"r2={tr.r2:.6g}")
    _out(f"verdict={tr.verdict}")
    _out(f"diverged_count={tr.diverged_count}/{tr.trials}")
    return OK if tr.verdict == "sync" else INFEASIBLE


COMMANDS = {
    "analyze": (cmd_analyze, "run the synchronization checks"),
    "margin": (cmd_margin, "small-gain margin and critical coefficient of dispersion"),
    "torus": (cmd_torus, "scalar torus margin sweep"),
    "simulate": (cmd_simulate, "Monte Carlo synchronization run"),
}


def build_parser():
    ap = _Parser(prog="lursync", description="Synchronization certificates for Lur'e networks with random links.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML analysis config")
        p.add_argument("--csv", help="write the CSV artifact here")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--seed", type=int, help="override sim.seed")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("lursync: error: --threads must be at least 1", file=sys.stderr)
        return INPUT_ERROR
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("lursync: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return INPUT_ERROR
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command][0](cfg, args)
    except (InputError, GraphError, MarginError, LinAlgError) as exc:
        print(f"lursync: error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
