"""Command-line interface.

Every CSV starts with ``#`` comment lines holding a JSON manifest and the
canonical command that regenerates the file.  Data go to ``--out`` (or
stdout); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .amm_core import FeeSchedule, PoolState, marginal_price
from .arbitrage import brute_force_optimal_trade, optimal_arb_trade
from .estimators import estimate_gbm
from .exceptions import AmmZonesError, DomainError, InfeasibleTargetError, NoCrossingError
from .gbm_risk import (
    FeeSide,
    GbmParams,
    bisect_min_fee,
    exit_probability,
    expected_blocks_to_il,
    fees_for_side,
    geometric_cdf,
    min_fee_for_target,
    pil_one_block,
    pil_upper_bound,
)
from .sim import (
    BUCKETS,
    SimConfig,
    compare_fee_vs_zero,
    estimate_pil_mc,
    exit_frequency,
    first_il_distribution,
    run_trajectory,
    standard_normals,
    stream_seed,
    summarize,
    zone_histogram,
)
from .zones import ig_zone_numeric, ig_zone_uniswap, lp_profit_after_arb, zone_boundaries

REFERENCE = {"x": 997348.0, "y": 3751882.0, "gamma1": 0.997, "gamma2": 1.0, "sigma": 0.0027}
DEFAULT_SIGMAS = "0.0005,0.001,0.002,0.004,0.008"

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_INFEASIBLE = 3


class CliError(Exception):
    pass


# -- library-level helpers behind the subcommands ----------------------------


def profit_curve(pool: PoolState, ratios) -> list[tuple[float, float, float]]:
    """``(ratio, lp_profit, arb_profit)`` of the optimal arbitrage at each ratio."""
    p_dex = marginal_price(pool)
    rows = []
    for r in ratios:
        trade = optimal_arb_trade(pool, r * p_dex)
        rows.append((float(r), lp_profit_after_arb(pool, r), trade.profit))
    return rows


def first_il_table(report, bound: float, horizon: int | None = None):
    """Rows ``(x, theory, exp_prob, sim)`` of the first-IL CDF comparison."""
    n = horizon or report.horizon
    blocks = np.arange(1, n + 1)
    theory = geometric_cdf(bound, blocks)
    exp_prob = geometric_cdf(report.estimated_p_il, blocks)
    return list(zip(blocks.tolist(), theory.tolist(), exp_prob.tolist(), report.cdf[:n].tolist()))


def worst_edge_frequency(boundaries, gbm: GbmParams, z) -> float:
    """Monte Carlo exit frequency from the worse of the two band edges, common draws ``z``."""
    if boundaries.is_degenerate:
        return 1.0
    return max(exit_frequency(boundaries, gbm, edge, z) for edge in boundaries.no_arb)


def min_fee_row(
    sigma: float,
    xi: float,
    z,
    side: FeeSide = FeeSide.INPUT_ONLY,
    weight_x: float = 0.2,
):
    """Minimum fees ``(uniswap_mc, balancer_mc, theory)`` for one volatility level.

    The first two bisect a Monte Carlo exit frequency evaluated on the fixed
    normals ``z`` (common random numbers keep the objective monotone in the
    fee); the last bisects the analytic worst-case bound.  Infeasible targets
    come back as ``nan``.
    """
    gbm = GbmParams(sigma)

    def uniswap(phi):
        return worst_edge_frequency(ig_zone_uniswap(fees_for_side(phi, side)), gbm, z)

    def balancer(phi):
        pool = PoolState.balancer(1.0, 1.0, weight_x, fees_for_side(phi, side))
        return worst_edge_frequency(zone_boundaries(pool), gbm, z)

    out = []
    for fn in (
        lambda: bisect_min_fee(uniswap, xi),
        lambda: bisect_min_fee(balancer, xi),
        lambda: min_fee_for_target(gbm, xi, side),
    ):
        try:
            out.append(fn())
        except InfeasibleTargetError:
            out.append(math.nan)
    return tuple(out)


def min_fee_table(sigmas, xi, n_draws=100_000, seed=0, side=FeeSide.INPUT_ONLY, weight_x=0.2):
    z = standard_normals(stream_seed(seed, 0), n_draws)
    return [(s, *min_fee_row(s, xi, z, side, weight_x)) for s in sigmas]


def read_price_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a ``timestamp,price`` CSV; errors name the offending row (1-based, header = 1)."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(line for line in io.StringIO(text) if not line.startswith("#"))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["timestamp", "price"]:
        raise CliError("row 1: expected header 'timestamp,price'")
    ts, ps = [], []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise CliError(f"row {row_no}: expected 2 columns, got {len(row)}")
        try:
            t, p = float(row[0]), float(row[1])
        except ValueError:
            raise CliError(f"row {row_no}: non-numeric value") from None
        if not (math.isfinite(t) and math.isfinite(p)):
            raise CliError(f"row {row_no}: non-finite value")
        if p <= 0.0:
            raise CliError(f"row {row_no}: price must be positive")
        if ts and t <= ts[-1]:
            raise CliError(f"row {row_no}: timestamp {row[0]} is not strictly increasing")
        ts.append(t)
        ps.append(p)
    if len(ts) < 30:
        raise CliError(f"need at least 30 rows, got {len(ts)}")
    return np.array(ts), np.array(ps)


# -- argument handling ---------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global")
    g.add_argument("--seed", type=int, default=0, help="master seed (64-bit unsigned)")
    g.add_argument("--out", default=None, help="output file (directory for simulate)")
    g.add_argument("--pool", choices=("uniswap", "balancer"), default="uniswap")
    g.add_argument("--wx", type=float, default=None, help="weight of token X (balancer)")
    g.add_argument("--wy", type=float, default=None, help="weight of token Y (balancer)")
    g.add_argument("--config", default=None, help="key=value file with flag defaults")
    return p


def _pool_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pool")
    g.add_argument("--x", type=float, default=REFERENCE["x"], help="reserve of token X")
    g.add_argument("--y", type=float, default=REFERENCE["y"], help="reserve of token Y")
    g.add_argument("--gamma1", type=float, default=None, help="1 - input fee")
    g.add_argument("--gamma2", type=float, default=None, help="1 - output fee")
    g.add_argument("--fee1", type=float, default=None, help="input fee (alias: gamma1 = 1 - fee1)")
    g.add_argument("--fee2", type=float, default=None, help="output fee (alias: gamma2 = 1 - fee2)")
    return p


def _gbm_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("price process")
    g.add_argument("--sigma", type=float, default=REFERENCE["sigma"], help="volatility")
    g.add_argument("--mu", type=float, default=0.0, help="drift")
    g.add_argument("--dt", type=float, default=12.0, help="block interval in seconds")
    g.add_argument(
        "--time-unit", choices=("block", "second"), default="block",
        help="unit of --sigma/--mu; 'second' rescales by --dt",
    )
    return p


def _sim_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("simulation")
    g.add_argument("--trajectories", type=int, default=10_000)
    g.add_argument("--blocks", type=int, default=None)
    g.add_argument("--jobs", type=int, default=1, help="worker threads")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ammzones", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, pool, gbm, sim = _common_parent(), _pool_parent(), _gbm_parent(), _sim_parent()

    sub.add_parser("zones", parents=[common, pool], help="zone boundaries and LP thresholds")

    p = sub.add_parser("profit-curve", parents=[common, pool], help="LP/arbitrageur profit CSV")
    p.add_argument("--ratio-min", type=float, default=0.99)
    p.add_argument("--ratio-max", type=float, default=1.01)
    p.add_argument("--steps", type=int, default=201)
    p.add_argument("--verify", action="store_true", help="cross-check with the brute-force optimizer")

    p = sub.add_parser("pil", parents=[common, pool, gbm], help="one-block IL probability")
    p.add_argument("--start", type=float, default=None, help="start ratio (default: upper band edge)")
    p.add_argument("--verify", type=int, default=0, metavar="N", help="Monte Carlo check with N draws")

    sub.add_parser("first-il", parents=[common, pool, gbm, sim], help="first-IL block CDF CSV")

    p = sub.add_parser("min-fee", parents=[common, gbm], help="minimum fee vs volatility CSV")
    p.add_argument("--xi", type=float, default=0.01)
    p.add_argument("--sigmas", default=DEFAULT_SIGMAS, help="comma-separated volatility grid")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--side", choices=[s.value for s in FeeSide], default="input")

    p = sub.add_parser("simulate", parents=[common, pool, gbm], help="per-block ledger CSVs")
    p.add_argument("--blocks", type=int, default=10_000)
    p.add_argument("--compare-zero-fee", action="store_true")

    p = sub.add_parser("estimate-vol", parents=[common], help="estimate GBM parameters from prices")
    p.add_argument("csv_path")
    p.add_argument("--dt", type=float, default=12.0, help="block interval in seconds")
    return parser


def _read_config(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _choose_subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise CliError(f"unknown command {command}")


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = _choose_subparser(parser, args.command)
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in _read_config(args.config).items():
            action = known.get(key)
            if action is None:
                raise CliError(f"{args.config}: unknown key {key!r}")
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _resolve_gamma(args, which: int) -> float:
    gamma = getattr(args, f"gamma{which}")
    fee = getattr(args, f"fee{which}")
    if gamma is not None and fee is not None:
        raise CliError(f"give either --gamma{which} or --fee{which}, not both")
    if fee is not None:
        return 1.0 - fee
    if gamma is not None:
        return gamma
    return REFERENCE[f"gamma{which}"]


def _weights(args) -> tuple[float, float]:
    if args.pool == "uniswap":
        if (args.wx not in (None, 0.5)) or (args.wy not in (None, 0.5)):
            raise CliError("--wx/--wy require --pool balancer")
        return 0.5, 0.5
    wx, wy = args.wx, args.wy
    if wx is None and wy is None:
        wx, wy = 0.2, 0.8
    elif wx is None:
        wx = 1.0 - wy
    elif wy is None:
        wy = 1.0 - wx
    return wx, wy


def resolve_pool(args) -> PoolState:
    g1, g2 = _resolve_gamma(args, 1), _resolve_gamma(args, 2)
    if not (0.0 < g1 <= 1.0 and 0.0 < g2 <= 1.0):
        raise DomainError(f"gammas must lie in (0, 1], got ({g1}, {g2})")
    wx, wy = _weights(args)
    return PoolState(args.x, args.y, wx, wy, FeeSchedule.from_gammas(g1, g2))


def resolve_gbm(args) -> GbmParams:
    if args.time_unit == "second":
        return GbmParams.from_per_second(args.sigma, args.mu, args.dt)
    return GbmParams(args.sigma, args.mu, 1.0)


def _resolved_params(args) -> dict:
    skip = {"command", "config", "out"}
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        params[key] = value
    for which in (1, 2):
        if hasattr(args, f"gamma{which}"):
            params.pop(f"fee{which}", None)
            params[f"gamma{which}"] = _resolve_gamma(args, which)
    if hasattr(args, "pool") and "x" in params:
        params["wx"], params["wy"] = _weights(args)
        if args.pool == "uniswap":
            params.pop("wx")
            params.pop("wy")
    return dict(sorted(params.items()))


def _command_line(args, params) -> str:
    parts = ["ammzones", args.command]
    positional = []
    for key, value in params.items():
        if key == "csv_path":
            positional.append(str(value))
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                parts.append(flag)
            continue
        parts += [flag, _fmt(value)]
    if args.out is not None:
        parts += ["--out", str(args.out)]
    return " ".join(shlex.quote(p) for p in parts + positional)


def manifest_lines(args, outputs) -> list[str]:
    params = _resolved_params(args)
    manifest = {
        "tool": "ammzones",
        "version": __version__,
        "subcommand": args.command,
        "seed": args.seed,
        "params": params,
        "outputs": [str(o) for o in outputs],
    }
    return [
        "# manifest: " + json.dumps(manifest, sort_keys=True, default=str),
        "# command: " + _command_line(args, params),
    ]


def _write_csv(args, target, header, rows, outputs=None):
    lines = manifest_lines(args, outputs or ([target] if target else ["-"]))
    buf = io.StringIO()
    buf.write("\n".join(lines) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    if target is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(target).write_text(buf.getvalue(), encoding="utf-8")


def _write_text(args, lines):
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


# -- subcommands ---------------------------------------------------------------


def cmd_zones(args) -> int:
    pool = resolve_pool(args)
    lines = [f"pool: {args.pool}"]
    try:
        b = ig_zone_numeric(pool) if args.pool == "balancer" else ig_zone_uniswap(pool.fees, pool)
    except NoCrossingError as exc:
        lines += [
            "method: numeric",
            f"no_arb_band: {_fmt(pool.fees.gamma_product)},{_fmt(1.0 / pool.fees.gamma_product)}",
            f"ig_zone: unbounded ({exc})",
        ]
        _write_text(args, lines)
        return EXIT_OK
    lines += [
        f"method: {b.method}",
        f"no_arb_band: {_fmt(b.no_arb[0])},{_fmt(b.no_arb[1])}",
        f"ig_zone: {_fmt(b.ig_zone[0])},{_fmt(b.ig_zone[1])}",
        f"tau: {_fmt(b.tau)}",
    ]
    if b.lp_threshold_x is not None:
        lines += [
            f"lp_threshold_x: {_fmt(b.lp_threshold_x)}",
            f"lp_threshold_y: {_fmt(b.lp_threshold_y)}",
        ]
    if b.is_degenerate:
        lines.append("degenerate: true")
    _write_text(args, lines)
    return EXIT_OK


def cmd_profit_curve(args) -> int:
    if not (args.ratio_min < 1.0 < args.ratio_max):
        raise CliError("the ratio range must straddle 1")
    if args.steps < 2:
        raise CliError("--steps must be at least 2")
    pool = resolve_pool(args)
    ratios = np.linspace(args.ratio_min, args.ratio_max, args.steps)
    rows = profit_curve(pool, ratios)
    if args.verify:
        worst = 0.0
        p_dex = marginal_price(pool)
        for r in ratios:
            a = optimal_arb_trade(pool, r * p_dex)
            b = brute_force_optimal_trade(pool, r * p_dex)
            if a.is_trade:
                worst = max(worst, abs(a.input_amount - b.input_amount) / a.input_amount)
        print(f"verify: max relative input mismatch {worst:.3e}", file=sys.stderr)
        if worst > 1e-6:
            _write_csv(args, args.out, ("price", "lp_profit", "arb_profit"), rows)
            return EXIT_ERROR
    _write_csv(args, args.out, ("price", "lp_profit", "arb_profit"), rows)
    return EXIT_OK


def cmd_pil(args) -> int:
    pool = resolve_pool(args)
    gbm = resolve_gbm(args)
    b = zone_boundaries(pool)
    start = args.start if args.start is not None else b.no_arb[1]
    p = pil_one_block(gbm, b, start)
    lines = [f"start_ratio: {_fmt(start)}", f"exit_probability: {_fmt(p)}"]
    if gbm.mu == 0.0:
        bound = pil_upper_bound(gbm, pool.fees, b)
        lines += [
            f"upper_bound: {_fmt(bound)}",
            f"expected_blocks_to_il: {_fmt(expected_blocks_to_il(bound))}",
        ]
    else:
        lines += ["upper_bound: n/a (requires mu = 0)",
                  f"expected_blocks_to_il: {_fmt(expected_blocks_to_il(p))}"]
    if args.verify:
        est, se = estimate_pil_mc(b, gbm, start, args.verify, stream_seed(args.seed, 0))
        lines.append(f"mc_estimate: {_fmt(est)} +/- {_fmt(se)}")
    _write_text(args, lines)
    return EXIT_OK


def cmd_first_il(args) -> int:
    pool = resolve_pool(args)
    gbm = resolve_gbm(args)
    b = zone_boundaries(pool)
    config = SimConfig(pool, gbm, args.blocks, args.trajectories, args.seed)
    report = first_il_distribution(config, b, n_jobs=args.jobs)
    bound = pil_upper_bound(GbmParams(gbm.sigma, 0.0, gbm.dt), pool.fees, b)
    if gbm.mu != 0.0:
        print("warning: theory column uses the mu = 0 bound", file=sys.stderr)
    _write_csv(args, args.out, ("x", "theory", "exp_prob", "sim"), first_il_table(report, bound))
    print(
        f"trajectories={config.n_trajectories} horizon={report.horizon} censored={report.censored} "
        f"estimated_p_il={report.estimated_p_il:.6g} upper_bound={bound:.6g}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_min_fee(args) -> int:
    try:
        sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    except ValueError:
        raise CliError(f"bad --sigmas list {args.sigmas!r}") from None
    if args.time_unit == "second":
        sigmas = [s * math.sqrt(args.dt) for s in sigmas]
    if args.mu != 0.0:
        raise CliError("min-fee requires --mu 0")
    wx = args.wx if args.wx is not None else (1.0 - args.wy if args.wy is not None else 0.2)
    rows = min_fee_table(sigmas, args.xi, args.draws, args.seed, FeeSide(args.side), wx)
    status = EXIT_OK
    for s, *fees in rows:
        for name, f in zip(("uniswap", "balancer", "theory"), fees):
            if math.isnan(f):
                print(f"infeasible: sigma={s} xi={args.xi} column={name}", file=sys.stderr)
                status = EXIT_INFEASIBLE
    _write_csv(args, args.out, ("std", "fees_uniswap", "fees_balancer", "fees_th"), rows)
    return status


def _ledger_rows(ledger):
    return [
        (e.block_index, e.total_profit_cum, e.lp_profit_cum, e.arb_profit_cum) for e in ledger
    ]


def cmd_simulate(args) -> int:
    pool = resolve_pool(args)
    gbm = resolve_gbm(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    config = SimConfig(pool, gbm, args.blocks, 1, args.seed)
    seed = stream_seed(args.seed, 0)
    header = ("block_no", "total_profit", "IL", "arb_profit")
    b_fee = zone_boundaries(pool)
    files = [out_dir / "fee_pool_profit.csv", out_dir / "zone_histogram.csv"]
    if args.compare_zero_fee:
        files.insert(1, out_dir / "zero_pool_profit.csv")
        paired = compare_fee_vs_zero(config, pool.fees, seed)
        summaries = {"fee": paired.fee_pool, "zero": paired.zero_pool}
    else:
        summaries = {"fee": summarize(run_trajectory(config, seed, b_fee))}
    _write_csv(args, files[0], header, _ledger_rows(summaries["fee"].ledger), files)
    hist_rows = [("fee", k, v) for k, v in zone_histogram(summaries["fee"].ledger, b_fee).items()]
    if "zero" in summaries:
        _write_csv(args, files[1], header, _ledger_rows(summaries["zero"].ledger), files)
        b_zero = zone_boundaries(pool.with_fees(FeeSchedule()))
        hist_rows += [
            ("zero", k, v) for k, v in zone_histogram(summaries["zero"].ledger, b_zero).items()
        ]
    _write_csv(args, files[-1], ("pool", "bucket", "count"), hist_rows, files)
    for name, s in summaries.items():
        print(
            f"{name}: trades={s.trade_count} lp_profit={s.lp_profit:.6g} "
            f"arb_profit={s.arb_profit:.6g} total={s.total_profit:.6g}"
        )
    return EXIT_OK


def cmd_estimate_vol(args) -> int:
    ts, ps = read_price_csv(args.csv_path)
    params, n = estimate_gbm(ts, ps, args.dt)
    _write_text(
        args,
        [
            f"mu_per_block: {_fmt(params.mu)}",
            f"sigma_per_block: {_fmt(params.sigma)}",
            f"block_seconds: {_fmt(args.dt)}",
            f"n_prices: {n + 1}",
            f"n_returns: {n}",
        ],
    )
    return EXIT_OK


COMMANDS = {
    "zones": cmd_zones,
    "profit-curve": cmd_profit_curve,
    "pil": cmd_pil,
    "first-il": cmd_first_il,
    "min-fee": cmd_min_fee,
    "simulate": cmd_simulate,
    "estimate-vol": cmd_estimate_vol,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (CliError, AmmZonesError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
