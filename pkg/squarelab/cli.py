# ######################################################################################################################
#  SquareLab Copyright (c) 2026 by the SquareLab authors                                                               #
#  is licensed under Creative Commons Attribution-NonCommercial-ShareAlike 4.0 International.                          #
#  To view a copy of this license, visit https://creativecommons.org/licenses/by-nc-sa/4.0/                            #
#                                                                                                                      #
#  Unless required by applicable law or agreed to in writing, software                                                 #
#  distributed under the License is distributed on an "AS IS" BASIS,                                                   #
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.                                            #
#  See the License for the specific language governing permissions and                                                 #
#  limitations under the License.                                                                                      #
# ######################################################################################################################
"""
``squarelab`` command line.

Every subcommand prints one JSON document to stdout and appends an :class:`~squarelab.ledger.ExperimentRecord` to the
ledger. Diagnostics go to stderr through loguru. Exit codes: 0 success, 1 failed verification or counterexample,
2 usage error.
"""

from __future__ import annotations

import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from loguru import logger
from pydantic import BaseModel, Field

from squarelab import __version__, utils
from squarelab.config import (
    DEFAULT_ANNEAL_ITERS,
    DEFAULT_T_END,
    DEFAULT_T_START,
    FILTER_TAPS,
    MAX_DENSE_ORACLE_RESOLUTION,
    OBJECTIVE_NAMES,
)
from squarelab.haar_line import DyadicSet, all_intervals, dilate, shift_energy
from squarelab.ledger import append_record, export_csv, export_json, load_ledger, make_record, resolve_ledger_path
from squarelab.martingale_core import LeafSet
from squarelab.moment_engine import (
    HaarSystem,
    chi_enumeration,
    haar_expansion,
    martingale_expansion,
    martingale_moment_coefficients,
    proof_certificate,
    wavelet_certificate,
)
from squarelab.numeric_core import exact_entry, exact_str, poly_eval
from squarelab.search import CounterexampleFound, anneal_search, exhaustive_search, get_objective
from squarelab.tensor_plane import (
    DyadicSet2D,
    dense_tensor_shift_energy,
    square_energy_2d,
    tensor_shift_energy,
)
from squarelab.tree_loader import load_tree
from squarelab.verify import SUITE_NAMES, run_suites
from squarelab.wavelet_grid import chi_monte_carlo, fit_moment_cubic, get_filter, smooth_eta_scan, square_ratio

LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "WARNING", "ERROR")
LOG_FORMAT = "{time:HH:mm:ss.SS} | {level} | {name}:{function} - {message}"

# exact chi(p) next to a Monte Carlo estimate only up to this set resolution
MAX_EXACT_WAVELET_RESOLUTION = 5


# ----------------------------------------------------------------------------------
# Configuration file
# ----------------------------------------------------------------------------------
class ConfigFile(BaseModel):
    """Flat ``key = value`` pairs mirroring CLI flags; keys are normalized to option names."""

    path: str
    options: Dict[str, str] = Field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str) -> ConfigFile:
        options = {}
        with open(path, "r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise click.BadParameter(f"line {number}: expected key = value, got '{line}'", param_hint="--config")
                key, value = line.split("=", 1)
                options[utils.normalize_option_name(key)] = value.strip()
        return cls(path=path, options=options)

    def default_map(self, group: click.Group) -> Dict[str, Any]:
        """Click default map: group options at the top level, then one entry per subcommand that has the option."""
        defaults: Dict[str, Any] = {}
        used = set()
        for param in group.params:
            if param.name in self.options:
                defaults[param.name] = self.options[param.name]
                used.add(param.name)
        for name, command in group.commands.items():
            for param in command.params:
                if param.name in self.options:
                    defaults.setdefault(name, {})[param.name] = self.options[param.name]
                    used.add(param.name)
        unknown = sorted(set(self.options) - used - {"config"})
        if unknown:
            raise click.BadParameter(f"unknown option(s) in {self.path}: {', '.join(unknown)}", param_hint="--config")
        return defaults


def _load_config(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[str]:
    if value:
        config = ConfigFile.from_file(value)
        ctx.default_map = config.default_map(ctx.command)
    return value


def _stderr_sink(message) -> None:
    sys.stderr.write(message)


class SquareLabGroup(click.Group):
    """Reports library ``ValueError`` as a usage error (exit 2)."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except ValueError as e:
            raise click.UsageError(str(e), ctx=ctx)


# ----------------------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------------------
def _ledger_option(f):
    return click.option("--ledger", type=click.Path(dir_okay=False), default=None,
                        help="Ledger file (overrides the group option and SQUARELAB_LEDGER).")(f)


def _ledger_path(ctx: click.Context) -> Path:
    return resolve_ledger_path(ctx.params.get("ledger") or ctx.obj.get("ledger"))


def _emit(
        ctx: click.Context,
        output: Dict[str, Any],
        results: Dict[str, Any],
        seed: Optional[int] = None,
) -> None:
    """Appends the ledger record, then prints ``output`` as sorted JSON."""
    parameters = {k: v for k, v in ctx.params.items() if k != "ledger"}
    record = make_record(ctx.info_name, parameters, results, seed=seed)
    append_record(_ledger_path(ctx), record)
    click.echo(json.dumps(output, sort_keys=True))


def _write_json(path: str, data: Any) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info("Wrote {}", path)


# ----------------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------------
@click.group(cls=SquareLabGroup)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), is_eager=True, expose_value=False,
              callback=_load_config, help="File of key = value defaults; explicit flags win.")
@click.option("--ledger", type=click.Path(dir_okay=False), default=None,
              help="Ledger file (default: $SQUARELAB_LEDGER or ./runs.jsonl).")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default="WARNING",
              show_default=True, help="Level of the stderr diagnostics.")
@click.version_option(__version__, prog_name="squarelab")
@click.pass_context
def cli(ctx: click.Context, ledger: Optional[str], log_level: str):
    """Exact square function, moment polynomial and Haar shift experiments on dyadic sets."""
    logger.remove()
    logger.add(_stderr_sink, level=log_level.upper(), format=LOG_FORMAT)
    ctx.ensure_object(dict)
    ctx.obj["ledger"] = ledger


@cli.command()
@click.option("--suite", type=click.Choice(SUITE_NAMES), default="all", show_default=True)
@click.option("--depth", type=click.IntRange(1, 6), default=4, show_default=True, help="Depth of random trees.")
@click.option("--trials", type=click.IntRange(1), default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_ledger_option
@click.pass_context
def verify(ctx: click.Context, suite: str, depth: int, trials: int, seed: int, ledger: Optional[str]):
    """Run invariant suites; exit 1 if any check fails."""
    suites = run_suites(suite, depth=depth, trials=trials, seed=seed)
    passed = all(s.passed for s in suites)
    output = {"suite": suite, "passed": passed, "suites": {s.name: s.to_dict() for s in suites}}

    results: Dict[str, Any] = {}
    for s in suites:
        results[f"{s.name}.passed"] = s.passed
        results[f"{s.name}.checks"] = s.checks
        if "oracle_match" in s.details:
            results["oracle_match"] = s.details["oracle_match"]
            output["oracle_match"] = s.details["oracle_match"]
    _emit(ctx, output, results, seed=seed)
    if not passed:
        logger.error("Verification failed: {}", [s.name for s in suites if not s.passed])
        ctx.exit(1)


@cli.command()
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Filtration tree JSON; selects the martingale setting.")
@click.option("--set", "set_spec", required=True,
              help="'leaves=..' / 'mask=..' with --tree, otherwise a dyadic set 'N=..;mask=..'.")
@click.option("--mode", type=click.Choice(["closed", "enumeration", "both"]), default="both", show_default=True,
              help="Closed-form coefficients, brute-force enumeration, or both with a match check.")
@click.option("--system", default="all", show_default=True, help="Haar system 'j:k,..' or 'all' (wavelet setting).")
@click.option("--include-root/--exclude-root", default=True, show_default=True)
@_ledger_option
@click.pass_context
def chi(ctx: click.Context, tree_path: Optional[str], set_spec: str, mode: str, system: str, include_root: bool,
        ledger: Optional[str]):
    """Moment polynomial chi(p) of the Bernoulli-randomized projection of 1_V."""
    if tree_path:
        tree = load_tree(tree_path)
        V = LeafSet.from_spec(tree, set_spec)
        pv = V.probability()
        coefficients = martingale_moment_coefficients(tree, V, include_root)
        expansion = martingale_expansion(tree, V, include_root)
        setting = "martingale"
        certificate = proof_certificate(tree, V).to_dict() if pv > 0 else None
    else:
        W = DyadicSet.from_spec(set_spec)
        haar_system = HaarSystem.parse(system, W.resolution)
        pv = W.measure
        wavelet_cert = wavelet_certificate(haar_system, W)
        coefficients = wavelet_cert.coefficients
        expansion = haar_expansion(haar_system, W)
        setting = "wavelet"
        certificate = wavelet_cert.to_dict()

    closed = coefficients.polynomial() if mode in ("closed", "both") else None
    oracle = chi_enumeration(expansion) if mode in ("enumeration", "both") else None
    chi_poly = closed if closed is not None else oracle
    oracle_match = closed == oracle if mode == "both" else None

    output = {
        "mode": mode,
        "setting": setting,
        "coeffs": chi_poly.to_strings(),
        "oracle_match": oracle_match,
        "pv": exact_str(pv),
        "coefficients": coefficients.to_dict(),
        "certificate": certificate,
    }
    results: Dict[str, Any] = {f"c{k}": chi_poly[k] for k in range(4)}
    results["pv"] = pv
    results["chi_half"] = poly_eval(chi_poly, Fraction(1, 2))
    if oracle_match is not None:
        results["oracle_match"] = oracle_match
    _emit(ctx, output, results)
    if oracle_match is False:
        logger.error("Closed form and enumeration disagree for {}", set_spec)
        ctx.exit(1)


@cli.command()
@click.option("--objective", type=click.Choice(OBJECTIVE_NAMES), required=True)
@click.option("--resolution", type=click.IntRange(0), required=True)
@click.option("--mode", type=click.Choice(["exhaustive", "anneal"]), default="exhaustive", show_default=True)
@click.option("--iters", type=click.IntRange(1), default=DEFAULT_ANNEAL_ITERS, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--t-start", type=float, default=DEFAULT_T_START, show_default=True)
@click.option("--t-end", type=float, default=DEFAULT_T_END, show_default=True)
@click.option("--workers", type=click.IntRange(1), default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Also write the report to this file.")
@_ledger_option
@click.pass_context
def eta(ctx: click.Context, objective: str, resolution: int, mode: str, iters: int, seed: int, t_start: float,
        t_end: float, workers: int, out: Optional[str], ledger: Optional[str]):
    """Extremal set search for one ratio objective."""
    target = get_objective(objective)
    failed = False
    try:
        if mode == "exhaustive":
            report = exhaustive_search(target, resolution, workers=workers)
        else:
            report = anneal_search(target, resolution, iters=iters, t_start=t_start, t_end=t_end, seed=seed)
    except CounterexampleFound as e:
        report, failed = e.report, True

    output = report.model_dump(mode="json")
    output["counterexample"] = failed
    if out:
        _write_json(out, output)
    _emit(ctx, output, report.results(), seed=seed if mode == "anneal" else None)
    if failed:
        ctx.exit(1)


@cli.command()
@click.option("--set", "set_spec", required=True, help="Dyadic set 'N=..;mask=..' or 'N=..;cells=..'.")
@_ledger_option
@click.pass_context
def shift(ctx: click.Context, set_spec: str, ledger: Optional[str]):
    """Haar shift energies of 1_V."""
    V = DyadicSet.from_spec(set_spec)
    energy = shift_energy(V)
    results = {
        "inside": energy.inside,
        "total": energy.total,
        "pairing": energy.pairing,
        "minus_norm": energy.minus_norm,
        "plus_norm": energy.plus_norm,
        "measure": energy.measure,
        "ratio": energy.ratio,
    }
    output = {name: exact_entry(value) for name, value in results.items()}
    output["set"] = V.to_spec()
    if V.resolution >= 1 and not V.mask >> (1 << (V.resolution - 1)):
        dilated = dilate(V)
        output["dilated"] = {"set": dilated.to_spec(), "ratio": exact_entry(shift_energy(dilated).ratio)}
    _emit(ctx, output, results)


@cli.command()
@click.option("--set", "set_spec", required=True, help="2D set 'N=..;mask2d=..' or 'N=..;cells=i1:i2,..'.")
@click.option("--include-mean/--haar-only", default=True, show_default=True,
              help="Whether mean and mixed rectangles enter the square function.")
@_ledger_option
@click.pass_context
def tensor(ctx: click.Context, set_spec: str, include_mean: bool, ledger: Optional[str]):
    """Tensor Haar shift energies and biparameter square function energy of 1_U."""
    U = DyadicSet2D.from_spec(set_spec)
    energy = tensor_shift_energy(U)
    square = square_energy_2d(U, include_mean)
    results = {
        "inside": energy.inside,
        "total": energy.total,
        "pairing": energy.pairing,
        "measure": energy.measure,
        "ratio": energy.ratio,
        "square_energy": square,
        "square_ratio": square / U.measure,
    }
    output: Dict[str, Any] = {name: exact_entry(value) for name, value in results.items()}
    output["set"] = U.to_spec()
    if U.resolution <= MAX_DENSE_ORACLE_RESOLUTION:
        dense = dense_tensor_shift_energy(U)
        output["dense_match"] = (dense.inside, dense.total, dense.pairing) == (
            energy.inside, energy.total, energy.pairing)
    _emit(ctx, output, results)


@cli.command()
@click.option("--filter", "filter_name", type=click.Choice(sorted(FILTER_TAPS)), default="haar", show_default=True)
@click.option("--set", "set_spec", required=True, help="Dyadic set 'N=..;mask=..'.")
@click.option("-p", "--p", "p", type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True)
@click.option("--trials", type=click.IntRange(100), default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--grid", type=click.IntRange(0), default=None, help="Grid exponent g (default: the set's N).")
@click.option("--max-level", type=click.IntRange(0), default=None, help="Randomize wavelets of levels below this.")
@click.option("--fit", is_flag=True, help="Also estimate at p = 1/4, 1/2, 3/4 and fit W1 p + W2 p^2 + W3 p^3.")
@click.option("--scan-samples", type=click.IntRange(0), default=0, show_default=True,
              help="Random sets for an empirical int_V S^2/|V| scan (0 disables).")
@click.option("--workers", type=click.IntRange(1), default=1, show_default=True)
@_ledger_option
@click.pass_context
def wavelet(ctx: click.Context, filter_name: str, set_spec: str, p: float, trials: int, seed: int,
            grid: Optional[int], max_level: Optional[int], fit: bool, scan_samples: int, workers: int,
            ledger: Optional[str]):
    """Monte Carlo chi(p) for a filter-bank wavelet system on the grid."""
    f = get_filter(filter_name)
    V = DyadicSet.from_spec(set_spec)
    grid = V.resolution if grid is None else grid
    estimate = chi_monte_carlo(V, f, p, trials, seed, grid_exponent=grid, max_level=max_level, workers=workers)
    output: Dict[str, Any] = {
        "filter": f.name,
        "set": V.to_spec(),
        "estimate": estimate.estimate,
        "stderr": estimate.stderr,
        "trials": estimate.trials,
        "seed": estimate.seed,
        "grid": estimate.grid,
        "p": estimate.p,
        "prng": estimate.prng,
        "square_ratio": square_ratio(V, f, grid) if not V.is_empty() else None,
    }
    results: Dict[str, Any] = {"estimate": estimate.estimate, "stderr": estimate.stderr}

    level = grid if max_level is None else max_level
    if f.name == "haar" and V.resolution <= MAX_EXACT_WAVELET_RESOLUTION:
        system = HaarSystem(V.resolution, tuple(I for I in all_intervals(V.resolution) if I.level < level))
        exact = poly_eval(wavelet_certificate(system, V).coefficients.polynomial(), Fraction(p))
        output["exact"] = exact_entry(exact)
        results["exact"] = exact

    if fit:
        points = [chi_monte_carlo(V, f, x, trials, seed, grid_exponent=grid, max_level=max_level, workers=workers)
                  for x in (0.25, 0.5, 0.75)]
        cubic = fit_moment_cubic(points)
        output["fit"] = {"W": list(cubic.W), "stderr": list(cubic.stderr), "points": list(cubic.points)}
        results.update({f"W{k + 1}_fit": w for k, w in enumerate(cubic.W)})

    if scan_samples:
        scan = smooth_eta_scan(f, V.resolution, grid, scan_samples, seed)
        output["eta_scan"] = {"min_ratio": scan.min_ratio, "argmin": scan.argmin, "evaluated": scan.evaluated}
        results["eta_scan_min"] = scan.min_ratio
    _emit(ctx, output, results, seed=seed)


@cli.command()
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: stdout).")
@_ledger_option
@click.pass_context
def export(ctx: click.Context, fmt: str, out: Optional[str], ledger: Optional[str]):
    """Export the ledger as CSV (one row per result) or as a JSON array of records."""
    path = _ledger_path(ctx)
    records, warnings = load_ledger(path)
    writer = export_csv if fmt == "csv" else export_json
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            count = writer(records, f)
        summary = {"ledger": str(path), "format": fmt, "out": out, "records": len(records), "rows": count,
                   "warnings": warnings}
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        buffer = io.StringIO()
        writer(records, buffer)
        click.echo(buffer.getvalue(), nl=False)
        click.echo(f"exported {len(records)} record(s), {warnings} warning(s)", err=True)


def run(argv: Optional[List[str]] = None) -> int:
    """Runs the CLI on ``argv`` and returns the exit code."""
    try:
        rv = cli.main(args=argv, prog_name="squarelab", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    return rv if isinstance(rv, int) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
