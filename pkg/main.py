#!/usr/bin/env python3
"""
Annealing Redescending M-Estimators - Experiment Runner
=======================================================

Influence profiles, kernel tables, the mixture location demo, the synthetic
vertex classification table and the tail-index study, written as CSV/JSON.

Usage:
    python main.py profile                 # K, r_max, gamma*, rho_eff, V over (c, T)
    python main.py kernel-dump --kind hs   # w, psi, rho tables for one kernel
    python main.py location-demo           # annealed location fit on a mixture sample
    python main.py vertex-sim --events 200 # vertex classification table
    python main.py tail-index --reps 10    # Hill oracle vs forward search
"""

import argparse
import dataclasses
import logging
import sys
from typing import Dict, List, Optional

import numpy as np

from redescending.demo import MixtureSpec, location_demo
from redescending.errors import EstimationError, ExperimentInterrupted
from redescending.influence import profile_grid, temperature_grid
from redescending.irls import AnnealingSchedule
from redescending.kernels import EstimatorKernel, KernelKind, psi, rho, weight
from redescending.tailindex import ForwardSearchConfig, analyze_sample, tail_experiment
from redescending.vertex import VertexSimConfig, standard_schemes, table1_experiment
from utils.artifacts import ArtifactWriter, read_column
from utils.config import Config, load_config_file, parse_grid
from utils.logger import setup_logging
from utils.signal_handler import GracefulKiller

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130


class ExperimentRunner:
    """Runs one experiment command and writes its artifacts."""

    def __init__(self, config: Config, logger: logging.Logger, killer: Optional[GracefulKiller] = None):
        self.config = config
        self.logger = logger
        self.killer = killer
        self.writer = ArtifactWriter(config.output_path, logger)

    def should_stop(self) -> bool:
        return bool(self.killer and self.killer.should_stop())

    def schedule(self, t_end: float) -> AnnealingSchedule:
        return AnnealingSchedule(t0=max(self.config.t0, t_end), t_end=t_end, q=self.config.q,
                                 epsilon=self.config.epsilon_t)

    # ========== COMMANDS ==========

    def cmd_profile(self) -> None:
        """Influence-function profile over a (c, T) grid."""
        cfg = self.config
        cutoffs = parse_grid(cfg.profile_cutoffs)
        temperatures = temperature_grid(cfg.profile_t_min, cfg.profile_t_max, cfg.profile_per_decade)
        self.logger.info(f"📈 Profiling {len(cutoffs)} cutoff(s) x {len(temperatures)} temperature(s)")
        rows = profile_grid(cutoffs, temperatures, cfg.profile_epsilon, should_stop=self.should_stop)
        self.writer.write_csv(
            "profile.csv",
            ["c", "T", "K", "r_max", "gamma_star", "rho_eff", "V"],
            ([r.c, r.T, r.K, r.r_max, r.gamma_star, r.rho_eff, r.V] for r in rows),
        )

    def cmd_kernel_dump(self) -> None:
        """w, psi and rho of one kernel on a symmetric residual grid, per temperature."""
        cfg = self.config
        kind = KernelKind(cfg.kernel_kind)
        grid = np.linspace(-cfg.kernel_r_max, cfg.kernel_r_max, cfg.kernel_r_points)
        grid = np.unique(np.concatenate([grid, [-cfg.cutoff, cfg.cutoff]]))
        rows = []
        for T in parse_grid(cfg.kernel_temperatures):
            if self.should_stop():
                raise ExperimentInterrupted("kernel dump stopped")
            kernel = EstimatorKernel(kind, c=cfg.cutoff, temperature=T, nu=cfg.kernel_nu)
            w, p, r = weight(kernel, grid), psi(kernel, grid), rho(kernel, grid)
            rows.extend(zip(grid, [T] * grid.size, w, p, r))
        self.logger.info(f"🧮 Tabulated {kind.value} kernel at c={cfg.cutoff}")
        self.writer.write_csv("kernels.csv", ["r", "T", "w", "psi", "rho"], rows)

    def cmd_location_demo(self) -> None:
        """Mixture sample, robust scale and the annealed location fit with its objective evolution."""
        cfg = self.config
        spec = MixtureSpec(p=cfg.mixture_p, m=cfg.mixture_m, sigma=cfg.mixture_sigma, n=cfg.mixture_n)
        result = location_demo(
            spec,
            np.random.default_rng(cfg.seed),
            c=cfg.cutoff,
            schedule=self.schedule(cfg.demo_t_end),
            grid=cfg.mu_grid,
            scale=cfg.demo_scale,
        )
        fit = result.fit
        self.logger.info(
            f"🎯 Estimate {fit.estimate:.6f} (scale {result.scale:.4f}, "
            f"{result.n_inliers} inliers / {result.n_outliers} outliers, "
            f"{result.final_local_minima} local minima at T={fit.temperature:g})"
        )

        rows = []
        for T, curve in zip(fit.temperatures, result.objective_curves):
            rows.extend((T, mu, M) for mu, M in zip(result.grid, curve))
        self.writer.write_csv("location_objective.csv", ["T", "mu", "M"], rows)
        self.writer.write_json(
            "location_summary.json",
            {
                "seed": cfg.seed,
                "mixture": dataclasses.asdict(spec),
                "cutoff": cfg.cutoff,
                "estimate": fit.estimate,
                "converged": fit.converged,
                "objective": fit.objective,
                "hsm": result.hsm,
                "median": result.median,
                "mad_about_hsm": {"raw": result.mad_mode.raw, "consistent": result.mad_mode.consistent},
                "mad_about_median": {"raw": result.mad_median.raw, "consistent": result.mad_median.consistent},
                "scale": result.scale,
                "scale_overridden": cfg.demo_scale is not None,
                "n_inliers": result.n_inliers,
                "n_outliers": result.n_outliers,
                "n_true_inliers": int(np.count_nonzero(result.true_inliers)),
                "local_minima": list(result.local_minima),
                "trace": [
                    {
                        "T": step.temperature,
                        "start": step.start,
                        "estimate": step.estimate,
                        "objective": step.objective,
                        "iterations": step.iterations,
                    }
                    for step in fit.trace
                ],
            },
        )

    def cmd_vertex_sim(self) -> None:
        """Classification table of the four annealing schemes on synthetic events."""
        cfg = self.config
        sim = VertexSimConfig(
            n_primary=cfg.n_primary,
            n_secondary=cfg.n_secondary,
            dimension=cfg.dimension,
            sigma_track=cfg.sigma_track,
            secondary_displacement=cfg.displacement,
            seed=cfg.seed,
        )
        self.logger.info(f"🎲 Fitting {cfg.events} event(s) under 4 schemes")
        schemes = standard_schemes(t0=cfg.t0, q=cfg.q, epsilon=cfg.epsilon_t)
        summaries = table1_experiment(cfg.events, sim, schemes=schemes, c=cfg.cutoff, should_stop=self.should_stop)
        for s in summaries:
            if s.n_failed:
                self.logger.warning(f"⚠️ {s.scheme}: {s.n_failed} failed fit(s) counted as not found")
        self.writer.write_csv(
            "table1.csv",
            ["scheme", "primary_w_lt_05", "primary_w_gt_05", "secondary_w_lt_05", "secondary_w_gt_05", "n_rec"],
            (
                [s.scheme, s.primary_w_lt_05, s.primary_w_gt_05, s.secondary_w_lt_05, s.secondary_w_gt_05, s.n_rec]
                for s in summaries
            ),
        )

    def cmd_tail_index(self) -> None:
        """Tail-index sweep over t samples, or a forward-search fit of a user sample."""
        cfg = self.config
        search = ForwardSearchConfig(
            block_size=cfg.block_size,
            c=cfg.tail_cutoff,
            temperature=cfg.tail_temperature,
            stop_fraction=cfg.stop_fraction,
            weight_ratio=cfg.weight_ratio,
            lms_seed=cfg.seed,
            iterate_new_weights=not cfg.single_refit,
        )
        if cfg.tail_input is not None:
            sample = read_column(cfg.tail_input)
            analysis = analyze_sample(sample, search)
            self.logger.info(
                f"📐 1/alpha = {analysis.search.slope:.4f} from {analysis.search.n_included} points "
                f"({analysis.search.stop_reason.value})"
            )
            self.writer.write_json(
                "tail_fit.json",
                {
                    "input": str(cfg.tail_input),
                    "n": analysis.plot.n,
                    "slope": analysis.search.slope,
                    "intercept": analysis.search.intercept,
                    "alpha": analysis.alpha,
                    "n_discard": analysis.plot.n_discard,
                    "n_included": analysis.search.n_included,
                    "block_size": analysis.search.block_size,
                    "stop_reason": analysis.search.stop_reason.value,
                    "hill_k": analysis.hill.k,
                    "hill_inv_alpha": analysis.hill.inv_alpha,
                },
            )
            return

        nu_grid = parse_grid(cfg.nu_grid)
        self.logger.info(f"📊 Tail study: {len(nu_grid)} nu value(s), n={cfg.tail_n}, {cfg.reps} replicate(s)")
        rows = tail_experiment(nu_grid, n=cfg.tail_n, n_reps=cfg.reps, seed=cfg.seed, config=search,
                               should_stop=self.should_stop)
        for row in rows:
            if row.n_failed:
                self.logger.warning(f"⚠️ nu={row.nu}: {row.n_failed} forward search(es) failed")
        self.writer.write_csv("tail_hill.csv", ["nu", "p_opt", "rmse_opt"],
                              ([r.nu, r.p_opt, r.rmse_opt] for r in rows))
        self.writer.write_csv("tail_alg_a.csv", ["nu", "p_used_mean", "p_used_sd", "rmse_algA"],
                              ([r.nu, r.p_used_mean, r.p_used_sd, r.rmse_alg_a] for r in rows))

    # ========== DISPATCH ==========

    def run(self, args: argparse.Namespace) -> int:
        """Run the selected command and map failures onto exit codes."""
        try:
            if args.command == "profile":
                self.cmd_profile()
            elif args.command == "kernel-dump":
                self.cmd_kernel_dump()
            elif args.command == "location-demo":
                self.cmd_location_demo()
            elif args.command == "vertex-sim":
                self.cmd_vertex_sim()
            elif args.command == "tail-index":
                self.cmd_tail_index()
            self.logger.info(f"✅ {args.command} completed")
            return EXIT_OK
        except (ExperimentInterrupted, KeyboardInterrupt) as e:
            self.logger.warning(f"🛑 {args.command} interrupted: {e}")
            return EXIT_INTERRUPTED
        except EstimationError as e:
            self.logger.error(f"❌ Numerical failure: {e}")
            return EXIT_NUMERICAL
        except ValueError as e:
            self.logger.error(f"❌ Invalid input: {e}")
            return EXIT_USAGE
        except OSError as e:
            self.logger.error(f"❌ I/O error: {e}")
            return EXIT_IO


def _common_options(defaults: Config) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=defaults.seed, help="Random seed (default: %(default)s)")
    common.add_argument("--out", dest="output_dir", default=defaults.output_dir,
                        help="Output directory (default: %(default)s)")
    common.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    common.add_argument("--log-level", default=defaults.log_level, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level (default: %(default)s)")
    return common


def _schedule_options(defaults: Config) -> argparse.ArgumentParser:
    schedule = argparse.ArgumentParser(add_help=False)
    schedule.add_argument("--c", dest="cutoff", type=float, default=defaults.cutoff,
                          help="Cutoff in standardized units (default: %(default)s)")
    schedule.add_argument("--t0", type=float, default=defaults.t0, help="Initial temperature (default: %(default)s)")
    schedule.add_argument("--q", type=float, default=defaults.q, help="Cooling factor (default: %(default)s)")
    schedule.add_argument("--epsilon-t", type=float, default=defaults.epsilon_t,
                          help="Schedule termination slack (default: %(default)s)")
    return schedule


def build_parser(defaults: Optional[Config] = None) -> argparse.ArgumentParser:
    """Argument parser whose defaults come from a Config."""
    defaults = defaults or Config()
    common = _common_options(defaults)
    schedule = _schedule_options(defaults)

    parser = argparse.ArgumentParser(
        description="Annealing redescending M-estimators - experiment runner",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py profile --c-list 2.5 --per-decade 5     # coarse profile for c=2.5
  python main.py kernel-dump --kind t --nu 3             # t3 kernel tables
  python main.py location-demo --m 3 --seed 7            # weakly separated mixture
  python main.py location-demo --scale 1.31              # fixed scale
  python main.py vertex-sim --events 1000 --out results  # full classification table
  python main.py tail-index --input sample.csv           # fit one sample
  python main.py tail-index --config tail.json --reps 5  # config file, flag wins

Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 numerical failure, 130 interrupted
        """,
    )
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    profile = commands.add_parser("profile", parents=[common], help="Influence profile CSV")
    profile.add_argument("--c-list", dest="profile_cutoffs", default=defaults.profile_cutoffs,
                         help="Cutoffs as start:step:stop or a list (default: %(default)s)")
    profile.add_argument("--t-min", dest="profile_t_min", type=float, default=defaults.profile_t_min)
    profile.add_argument("--t-max", dest="profile_t_max", type=float, default=defaults.profile_t_max)
    profile.add_argument("--per-decade", dest="profile_per_decade", type=int, default=defaults.profile_per_decade)
    profile.add_argument("--epsilon", dest="profile_epsilon", type=float, default=defaults.profile_epsilon,
                         help="Influence threshold of the effective rejection point (default: %(default)s)")

    dump = commands.add_parser("kernel-dump", parents=[common], help="Kernel function tables")
    dump.add_argument("--kind", dest="kernel_kind", default=defaults.kernel_kind,
                      choices=[k.value for k in KernelKind])
    dump.add_argument("--c", dest="cutoff", type=float, default=defaults.cutoff)
    dump.add_argument("--nu", dest="kernel_nu", type=float, default=defaults.kernel_nu)
    dump.add_argument("--temperatures", dest="kernel_temperatures", default=defaults.kernel_temperatures)
    dump.add_argument("--r-max", dest="kernel_r_max", type=float, default=defaults.kernel_r_max)
    dump.add_argument("--r-points", dest="kernel_r_points", type=int, default=defaults.kernel_r_points)

    demo = commands.add_parser("location-demo", parents=[common, schedule], help="Mixture location demo")
    demo.add_argument("--p", dest="mixture_p", type=float, default=defaults.mixture_p)
    demo.add_argument("--m", dest="mixture_m", type=float, default=defaults.mixture_m)
    demo.add_argument("--sigma", dest="mixture_sigma", type=float, default=defaults.mixture_sigma)
    demo.add_argument("--n", dest="mixture_n", type=int, default=defaults.mixture_n)
    demo.add_argument("--t-end", dest="demo_t_end", type=float, default=defaults.demo_t_end)
    demo.add_argument("--scale", dest="demo_scale", type=float, default=defaults.demo_scale, help="Fixed scale instead of the MAD about the HSM")
    demo.add_argument("--mu-min", type=float, default=defaults.mu_min)
    demo.add_argument("--mu-max", type=float, default=defaults.mu_max)
    demo.add_argument("--mu-points", type=int, default=defaults.mu_points)

    vertex = commands.add_parser("vertex-sim", parents=[common, schedule], help="Vertex classification table")
    vertex.add_argument("--events", type=int, default=defaults.events)
    vertex.add_argument("--n-primary", type=int, default=defaults.n_primary)
    vertex.add_argument("--n-secondary", type=int, default=defaults.n_secondary)
    vertex.add_argument("--dimension", type=int, default=defaults.dimension, choices=[2, 3])
    vertex.add_argument("--sigma-track", type=float, default=defaults.sigma_track)
    vertex.add_argument("--displacement", type=float, default=defaults.displacement)

    tail = commands.add_parser("tail-index", parents=[common], help="Tail-index study")
    tail.add_argument("--nu-grid", default=defaults.nu_grid, help="Degrees of freedom (default: %(default)s)")
    tail.add_argument("--tail-n", type=int, default=defaults.tail_n, help="Sample size (default: %(default)s)")
    tail.add_argument("--reps", type=int, default=defaults.reps)
    tail.add_argument("--cutoff", dest="tail_cutoff", type=float, default=defaults.tail_cutoff)
    tail.add_argument("--temperature", dest="tail_temperature", type=float, default=defaults.tail_temperature)
    tail.add_argument("--stop-fraction", type=float, default=defaults.stop_fraction)
    tail.add_argument("--weight-ratio", type=float, default=defaults.weight_ratio)
    tail.add_argument("--block-size", type=int, default=defaults.block_size, help="Block size (default: 1%% of the sample)")
    tail.add_argument("--single-refit", action="store_true", default=defaults.single_refit,
                      help="Weight each new block once from the arriving line and refit in one solve")
    tail.add_argument("--input", dest="tail_input", default=defaults.tail_input, help="One-column CSV sample to fit instead of the sweep")
    return parser


def _option_dests(parser: argparse.ArgumentParser) -> Dict[str, str]:
    """Map every option name (without dashes) and dest of all subcommands onto its dest."""
    names = {}
    actions = list(parser._actions)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                actions.extend(sub._actions)
    for action in actions:
        for option in action.option_strings:
            names[option.lstrip("-").replace("-", "_")] = action.dest
        names[action.dest] = action.dest
    return names


def load_defaults(config_path: Optional[str]) -> Config:
    """Config with the JSON file's values applied; unknown keys are an error."""
    config = Config()
    if not config_path:
        return config
    dests = _option_dests(build_parser(config))
    fields = {f.name for f in dataclasses.fields(Config)}
    overrides = {}
    for key, value in load_config_file(config_path).items():
        dest = key if key in fields else dests.get(key, key)
        if dest not in fields:
            raise ValueError(f"unknown option {key!r} in {config_path}")
        overrides[dest] = value
    return dataclasses.replace(config, **overrides)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        defaults = load_defaults(known.config)
    except ValueError as e:
        logging.getLogger(__name__).error(f"❌ Invalid config file: {e}")
        return EXIT_USAGE
    except OSError as e:
        logging.getLogger(__name__).error(f"❌ Cannot read config file: {e}")
        return EXIT_IO

    args = build_parser(defaults).parse_args(argv)
    values = {f.name: getattr(args, f.name) for f in dataclasses.fields(Config) if hasattr(args, f.name)}
    config = dataclasses.replace(defaults, **values)
    logger = setup_logging(config.log_level)

    with GracefulKiller(logger) as killer:
        return ExperimentRunner(config, logger, killer).run(args)


if __name__ == "__main__":
    sys.exit(main())
