import argparse
import sys

from config import logger
from pipeline import (GRID_MODES, StageError, UsageError, cmd_ablate, cmd_eval, cmd_grid,
                      cmd_select, resolve_config)

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_USAGE = 2


def add_run_arguments(parser):
    """Flags shared by every subcommand; unset flags leave lower config layers in place."""
    parser.add_argument("--config", help="key=value run-config file")
    parser.add_argument("--train", help="Training CSV/TSV file")
    parser.add_argument("--test", help="Test CSV/TSV file")
    parser.add_argument("--labels", help="Number of trailing label columns, or a manifest file with label_count=<int>")
    parser.add_argument("--scaling", choices=("standard", "minmax", "none"))
    parser.add_argument("--bins", type=int, help="Equal-frequency bins for mutual information")
    parser.add_argument("--sigma", help="Gaussian kernel scale: 'median' or a positive number")
    for weight in ("alpha", "beta", "gamma", "delta", "epsilon"):
        parser.add_argument(f"--{weight}", type=float, help=f"Objective weight {weight}")
    parser.add_argument("--k", type=int, help="Latent dimension (default min(c, 10))")
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--tol", type=float, help="Relative objective change that stops the fit")
    parser.add_argument("--abs-tol", dest="abs_tol", type=float, help="Optional absolute objective change that stops the fit")
    parser.add_argument("--d-smoothing", dest="d_smoothing", type=float)
    parser.add_argument("--n-walks", dest="n_walks", type=int)
    parser.add_argument("--walk-length", dest="walk_length", type=int)
    parser.add_argument("--jump-prob", dest="jump_prob", type=float)
    parser.add_argument("--decay", dest="decay_factor", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--classifier", choices=("knn3", "mlknn10"))
    parser.add_argument("--disable-rw", "--disable_rw", dest="disable_rw", action="store_true", default=None,
                        help="Drop the random-walk term (R_w replaced by MI, gamma=0)")
    parser.add_argument("--disable-fla", "--disable_fla", dest="disable_fla", action="store_true", default=None,
                        help="Drop the feature-label alignment term (delta=0)")
    parser.add_argument("--all-steps-below", dest="all_steps_below", type=int,
                        help="Evaluate every feature count 1..d when d is below this value")
    parser.add_argument("--dump-graph", dest="dump_graph", action="store_true", default=None)
    parser.add_argument("--n-jobs", dest="n_jobs", type=int)
    parser.add_argument("--out", help="Output directory")


def build_parser():
    parser = argparse.ArgumentParser(description="GRW-SCMF multi-label feature selection")
    subparsers = parser.add_subparsers(dest="command", required=True)

    select = subparsers.add_parser("select", help="Rank features and write ranking, R_w and trace CSVs")
    add_run_arguments(select)

    evaluate = subparsers.add_parser("eval", help="Evaluate a saved ranking on the test half")
    add_run_arguments(evaluate)
    evaluate.add_argument("--ranking", required=True, help="Ranking CSV written by 'select'")

    grid = subparsers.add_parser("grid", help="Grid search on a validation split of the training half")
    add_run_arguments(grid)
    grid.add_argument("--grid", required=True, help="key=value grid file with comma-separated values")
    grid.add_argument("--mode", choices=GRID_MODES, default="product")

    ablate = subparsers.add_parser("ablate", help="Compare the full model with RW and FLA ablations")
    add_run_arguments(ablate)
    return parser


RUN_KEYS = ("train", "test", "labels", "scaling", "bins", "sigma", "alpha", "beta", "gamma", "delta",
            "epsilon", "k", "max_iter", "tol", "abs_tol", "d_smoothing", "n_walks", "walk_length",
            "jump_prob", "decay_factor", "seed", "classifier", "disable_rw", "disable_fla",
            "all_steps_below", "dump_graph", "n_jobs", "out")


def main(argv=None):
    """Main entry point for the feature selection command line."""
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {key: getattr(args, key) for key in RUN_KEYS}

    try:
        config = resolve_config(args.config, overrides)
        logger.info(f"Running '{args.command}' with output directory {config.out}")
        if args.command == "select":
            cmd_select(config)
        elif args.command == "eval":
            cmd_eval(config, args.ranking)
        elif args.command == "grid":
            cmd_grid(config, args.grid, args.mode)
        elif args.command == "ablate":
            cmd_ablate(config)
    except UsageError as e:
        logger.error(f"Usage error: {str(e)}")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        logger.error(f"{args.command} failed in stage '{e.stage}': {str(e.__cause__)}")
        return EXIT_STAGE_FAILURE
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return EXIT_STAGE_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
