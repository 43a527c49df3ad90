"""Command-line entry point: ``mmquote --config run.json --out results/``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import svg
from .calibration import fit_exponential_intensity, read_exposures
from .closed_form import approx_quote_grid_multi, gamma_matrix, write_quote_table
from .config import RunConfig, load_config
from .errors import ConfigError, MarketMakingError
from .multi_asset import quote_grid_multi, solve_theta_multi
from .policies import ClosedFormPolicy, ConstantOffsetsPolicy, SolvedSurfacePolicy, WidenedPolicy
from .simulator import MarketSimConfig, simulate_paths
from .single_asset import quote_rows, solve_theta

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def bundled_configs() -> list:
    root = resources.files("mmquote") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config_path(name: str) -> Path:
    path = resources.files("mmquote") / "configs" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"no bundled config {name!r}; available: {', '.join(bundled_configs())}", ("--bundled",))
    return Path(str(path))


def _num(x: float) -> str:
    return "" if not np.isfinite(x) else f"{x:.17g}"


def _bp(x: float, notional: float) -> str:
    return f"{'-':>10}" if not np.isfinite(x) else f"{1e4 * x / notional:10.3f}"


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_num(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _sample_times(T: float, n: int) -> np.ndarray:
    return np.linspace(0.0, T, n)


def run_solve_single(cfg: RunConfig, out: Path, log) -> None:
    problem = cfg.single_problem()
    num = cfg.numerics
    surface = solve_theta(problem, dt=num.dt, tol=num.tol, max_iter=num.max_iter)
    surface.to_csv(out / "theta.csv")
    ctx_b, ctx_a = problem.bid_context, problem.ask_context
    q = surface.inventory_grid
    bid0, ask0 = quote_rows(surface, ctx_b, ctx_a, surface.at(0.0))
    _write_csv(out / "quotes_vs_inventory.csv", "q,bid_offset,ask_offset", zip(q.tolist(), bid0.tolist(), ask0.tolist()))

    times = _sample_times(problem.T, cfg.output.time_samples)
    rows = np.array([surface.at(t) for t in times])
    bid_t, ask_t = quote_rows(surface, ctx_b, ctx_a, rows)
    _write_csv(
        out / "quotes_vs_time.csv",
        "t,q,bid_offset,ask_offset",
        ((float(t), float(qq), float(bid_t[n, j]), float(ask_t[n, j])) for n, t in enumerate(times) for j, qq in enumerate(q)),
    )
    svg.write(
        out / "quotes_vs_inventory.svg",
        svg.line_chart([("bid", q, bid0), ("ask", q, ask0)], "Optimal quotes at t = 0", "inventory q", "offset"),
    )
    svg.write(
        out / "quotes_vs_time.svg",
        svg.line_chart(
            [(f"q={qq:.4g}", times, bid_t[:, j]) for j, qq in enumerate(q)], "Optimal bid offset over time", "t (s)", "bid offset"
        ),
    )
    notional = cfg.output.notional
    log(f"optimal offsets at t=0 in bp of notional {notional:g}")
    log(f"{'q':>11} {'bid(bp)':>10}  {'ask(bp)':>10}")
    for qq, b, a in zip(q, bid0, ask0):
        log(f"{qq:11.4g} {_bp(b, notional)}  {_bp(a, notional)}")


def _heatmaps(out: Path, axes, bid, names, prefix: str, title: str) -> None:
    d = len(axes)
    if d == 1:
        svg.write(out / f"{prefix}_asset1.svg", svg.line_chart([("bid", axes[0], bid[0])], title, "q1", "bid offset"))
        return
    mid = tuple(a.size // 2 for a in axes)
    for i in range(d):
        # show asset i's bid over (q_i, q_j) with j the next asset and the rest at zero inventory
        j = (i + 1) % d
        sl = list(mid)
        sl[i] = slice(None)
        sl[j] = slice(None)
        plane = bid[i][tuple(sl)]
        if i > j:
            plane = plane.T
        svg.write(
            out / f"{prefix}_asset{i + 1}.svg",
            svg.heatmap(plane, axes[i], axes[j], f"{title}: {names[i]}", f"q of {names[i]}", f"q of {names[j]}"),
        )


def _names(cfg: RunConfig) -> list:
    return [a.name or f"asset{i + 1}" for i, a in enumerate(cfg.assets)]


def _log_multi(log, cfg: RunConfig, axes, bid, ask) -> None:
    notional = cfg.output.notional
    centre = tuple(a.size // 2 for a in axes)
    log(f"offsets at zero inventory in bp of notional {notional:g}")
    for i, name in enumerate(_names(cfg)):
        log(f"  {name:>10}: bid {_bp(bid[i][centre], notional)}  ask {_bp(ask[i][centre], notional)}")


def run_solve_multi(cfg: RunConfig, out: Path, log) -> None:
    problem = cfg.multi_problem()
    num = cfg.numerics
    surface = solve_theta_multi(problem, dt=num.dt, tol=num.tol, max_iter=num.max_iter, max_nodes=num.max_nodes)
    surface.to_csv(out / "theta.csv")
    bid, ask = quote_grid_multi(surface, problem.contexts(), 0.0)
    write_quote_table(out / "quotes.csv", problem.axes, bid, ask)
    _heatmaps(out, problem.axes, bid, _names(cfg), "bid_heatmap", "Optimal bid at t = 0")
    _log_multi(log, cfg, problem.axes, bid, ask)


def run_approx(cfg: RunConfig, out: Path, log) -> None:
    problem = cfg.multi_problem()
    gm = gamma_matrix(problem.Sigma, problem.contexts())
    bid, ask = approx_quote_grid_multi(gm, problem.gamma, problem.axes)
    write_quote_table(out / "quotes.csv", problem.axes, bid, ask)
    _write_csv(out / "gamma_matrix.csv", ",".join(f"col{j + 1}" for j in range(gm.d)), (tuple(map(float, r)) for r in gm.Gamma))
    if problem.d == 1:
        q = problem.axes[0]
        svg.write(
            out / "quotes_vs_inventory.svg",
            svg.line_chart([("bid", q, bid[0]), ("ask", q, ask[0])], "Approximate quotes", "inventory q", "offset"),
        )
    else:
        _heatmaps(out, problem.axes, bid, _names(cfg), "bid_heatmap", "Approximate bid")
    _log_multi(log, cfg, problem.axes, bid, ask)


def _policy(cfg: RunConfig, problem):
    sim = cfg.simulation
    num = cfg.numerics
    if sim.policy == "constant":
        if sim.bid_offsets is None or sim.ask_offsets is None:
            raise ConfigError("constant policy needs bid_offsets and ask_offsets", ("simulation",))
        if len(sim.bid_offsets) != problem.d or len(sim.ask_offsets) != problem.d:
            raise ConfigError(f"offset lists need {problem.d} entries", ("simulation",))
        return ConstantOffsetsPolicy(sim.bid_offsets, sim.ask_offsets)
    if sim.policy == "closed-form":
        return ClosedFormPolicy(problem)
    if problem.d == 1:
        single = cfg.single_problem()
        surface = solve_theta(single, dt=num.dt, tol=num.tol, max_iter=num.max_iter)
        base = SolvedSurfacePolicy(surface, (single.bid_context, single.ask_context))
    else:
        surface = solve_theta_multi(problem, dt=num.dt, tol=num.tol, max_iter=num.max_iter, max_nodes=num.max_nodes)
        base = SolvedSurfacePolicy(surface, problem.contexts())
    return WidenedPolicy(base, sim.widen) if sim.policy == "widened" else base


def run_simulate(cfg: RunConfig, out: Path, log) -> None:
    problem = cfg.multi_problem()
    sim = cfg.simulation
    policy = _policy(cfg, problem)
    config = MarketSimConfig(
        problem,
        n_paths=sim.n_paths,
        base_seed=sim.seed,
        dt_sim=sim.dt_sim,
        x0=sim.x0,
        q0=sim.q0,
        S0=sim.S0,
        delta_floor=sim.delta_floor,
        record_events=sim.events,
    )
    report = simulate_paths(config, policy)
    a, b = report.model_a, report.model_b
    _write_csv(
        out / "summary.csv",
        "statistic,estimate,standard_error",
        [
            ("model_a_utility", a.mean, a.se),
            ("model_a_certainty_equivalent", report.certainty_equivalent, float("nan")),
            ("model_b_value", b.mean, b.se),
        ],
    )
    d = problem.d
    header = "path,x_T," + ",".join(f"q{i + 1}_T" for i in range(d)) + "," + ",".join(f"S{i + 1}_T" for i in range(d))
    header += ",running_penalty,wealth"
    _write_csv(
        out / "paths.csv",
        header,
        (
            (p, float(report.x_T[p]), *map(float, report.q_T[p]), *map(float, report.S_T[p]), float(report.running_penalty[p]), float(report.wealth[p]))
            for p in range(report.n_paths)
        ),
    )
    if sim.events:
        report.write_events(out / "events.csv")
    log(f"{report.n_paths} paths, policy {sim.policy}")
    log(f"  model A utility {a.mean:.6g} (se {a.se:.3g}), certainty equivalent {report.certainty_equivalent:.6g}")
    log(f"  model B value   {b.mean:.6g} (se {b.se:.3g})")


def run_calibrate(cfg: RunConfig, out: Path, log, base_dir: Path) -> None:
    if cfg.calibration is None:
        raise ConfigError("calibrate mode needs a calibration section", ("calibration",))
    src = Path(cfg.calibration["input"])
    if not src.is_absolute():
        src = base_dir / src
    if not src.is_file():
        raise ConfigError(f"cannot read observations file {src}", ("calibration", "input"))
    fit = fit_exponential_intensity(read_exposures(src))
    _write_csv(out / "fit.csv", "A,k,log_likelihood", [(fit.A, fit.k, fit.log_likelihood)])
    log(f"A = {fit.A:.6g}, k = {fit.k:.6g}, log-likelihood = {fit.log_likelihood:.6g}")


def run(cfg: RunConfig, out: Path, base_dir: Path = Path("."), log=print) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "solve-single":
        run_solve_single(cfg, out, log)
    elif cfg.mode == "solve-multi":
        run_solve_multi(cfg, out, log)
    elif cfg.mode == "approx":
        run_approx(cfg, out, log)
    elif cfg.mode == "simulate":
        run_simulate(cfg, out, log)
    else:
        run_calibrate(cfg, out, log, base_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmquote", description="Run an optimal market-making job from a JSON configuration.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a JSON run configuration")
    src.add_argument("--bundled", help=f"name of a bundled configuration ({', '.join(bundled_configs())})")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="simulation base seed")
    p.add_argument("--paths", type=int, help="number of simulated paths")
    p.add_argument("--dt", type=float, help="solver time step in seconds")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = Path(args.config) if args.config else bundled_config_path(args.bundled)
        cfg = load_config(path)
        if args.seed is not None or args.paths is not None:
            if (args.seed is not None and args.seed < 0) or (args.paths is not None and args.paths < 1):
                raise ConfigError("--seed must be >= 0 and --paths >= 1", ("simulation",))
            changes = {}
            if args.seed is not None:
                changes["seed"] = args.seed
            if args.paths is not None:
                changes["n_paths"] = args.paths
            cfg = dataclasses.replace(cfg, simulation=dataclasses.replace(cfg.simulation, **changes))
        if args.dt is not None:
            if not args.dt > 0:
                raise ConfigError("--dt must be positive", ("numerics", "dt"))
            cfg = dataclasses.replace(cfg, numerics=dataclasses.replace(cfg.numerics, dt=args.dt))
        out = Path(args.out) if args.out else Path(cfg.output.dir)
        run(cfg, out, base_dir=path.parent)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MarketMakingError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"config error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
