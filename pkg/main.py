#!/usr/bin/env python3
"""
RoseSpec - spectral statistics of Dirac rose graphs
Main application entry point

This file demonstrates:
1. Command-line parsing with argparse subcommands
2. Layered configuration (defaults, config file, flags)
3. Mapping failures onto stable exit codes
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

# Add project directories to Python path for imports
sys.path.append(str(Path(__file__).parent))

from cli.commands import (
    cmd_compare,
    cmd_constant_c,
    cmd_formfactor,
    cmd_paircorr,
    cmd_predict,
    cmd_spectrum,
)
from cli.experiments import COMPARE_MODES, PREDICT_FAMILIES
from graphs.secular import GraphKind
from utils.config import Config
from utils.errors import EXIT_OK, RoseSpecError, exit_code_for
from utils.helpers import setup_logging

COMMANDS: Dict[str, Callable] = {
    'spectrum': cmd_spectrum,
    'paircorr': cmd_paircorr,
    'formfactor': cmd_formfactor,
    'predict': cmd_predict,
    'constant-c': cmd_constant_c,
    'compare': cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser.

    Learning Notes:
    - Flags default to None so that an unset flag never overrides the
      config file
    - Shared flags live on a parent parser reused by every subcommand
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--graph', choices=[kind.value for kind in GraphKind])
    common.add_argument('--bonds', type=int, help='number of bonds B')
    common.add_argument('--eigenvalues', type=int, help='eigenvalues per realisation')
    common.add_argument('--realisations', type=int)
    common.add_argument('--seed', type=int, help='master seed')
    common.add_argument('--bin-width', dest='bin_width', type=float)
    common.add_argument('--x-max', dest='x_max', type=float)
    common.add_argument('--out', help='output path prefix')
    common.add_argument('--resample-lengths', dest='resample_lengths', action='store_const', const=True,
                        help='draw fresh bond lengths for every realisation')
    common.add_argument('--config', help='key=value experiment file')
    common.add_argument('--threads', type=int, help='worker threads (0 = physical cores)')
    common.add_argument('--log-level', dest='log_level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--log-dir', dest='log_dir')
    common.add_argument('--lengths', help='comma-separated bond lengths (debug override)')
    common.add_argument('--angles', help='comma-separated spin angles (debug override)')
    common.add_argument('--poisson', action='store_const', const=True,
                        help='replace spectra by uncorrelated surrogates')

    parser = argparse.ArgumentParser(
        prog='rosespec',
        description='Spectra and spectral statistics of Dirac rose and Neumann star/rose graphs',
    )
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('spectrum', parents=[common], help='write eigenvalues of every realisation')
    sub.add_parser('paircorr', parents=[common], help='ensemble-averaged pair correlation R2(x)')

    formfactor = sub.add_parser('formfactor', parents=[common], help='empirical and predicted form factor')
    formfactor.add_argument('--tau-min', dest='tau_min', type=float)
    formfactor.add_argument('--tau-max', dest='tau_max', type=float)
    formfactor.add_argument('--tau-step', dest='tau_step', type=float)
    formfactor.add_argument('--window', type=float, help='window half-width as a fraction of the span')

    predict = sub.add_parser('predict', parents=[common], help='sample an analytic prediction')
    predict.add_argument('--family', choices=PREDICT_FAMILIES)
    predict.add_argument('--start', type=float)
    predict.add_argument('--stop', type=float)
    predict.add_argument('--step', type=float)

    constant = sub.add_parser('constant-c', parents=[common], help='small-x constant by quadrature and Monte Carlo')
    constant.add_argument('--samples', type=int)
    constant.add_argument('--tolerance', type=float)

    compare = sub.add_parser('compare', parents=[common], help='comparison tables across ensembles')
    compare.add_argument('--mode', choices=COMPARE_MODES)
    compare.add_argument('--compare-bonds', dest='compare_bonds', help='comma-separated bond counts')

    return parser


class RoseSpecApp:
    """
    Main application class: parses arguments, resolves configuration and
    runs one subcommand.
    """

    def __init__(self, argv: Optional[List[str]] = None):
        self.args = build_parser().parse_args(argv)
        setup_logging(self.args.log_level, self.args.log_dir)

        self.config = Config(self.args.config)
        overrides = {k: v for k, v in vars(self.args).items() if k not in ('command', 'config', 'log_level', 'log_dir')}
        self.config.apply_overrides(overrides)

    def run(self):
        experiment = self.config.to_experiment()
        return COMMANDS[self.args.command](experiment)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Application entry point.

    Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O failure.
    """
    if sys.version_info < (3, 8):
        print("❌ Python 3.8 or higher is required")
        return 1

    try:
        RoseSpecApp(argv).run()
        return EXIT_OK
    except SystemExit as e:
        return int(e.code or 0)
    except KeyboardInterrupt:
        print("\n👋 Interrupted by user", file=sys.stderr)
        return 130
    except (RoseSpecError, OSError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
