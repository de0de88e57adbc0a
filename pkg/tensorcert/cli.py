"""Command-line entry point: approximate, certify, reproduce examples, run baselines."""
import asyncio
import json
import logging
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from .classes.certificate import Certificate
from .classes.errors import InputError, TensorCertError
from .classes.solution import MultistartConfig, SolverOptions
from .graph import CertificationGraph
from .oracle import baseline_rank_r, brute_rank_one
from .services.example_suite import EXAMPLES, render_table, run_examples
from .services.report_service import RunReport, build_report, certify_report, render_certificate, render_text
from .services.tensor_io import load_tensor, save_moments

logger = logging.getLogger(__name__)

EXIT_UNCERTIFIED = 2


def _fail(e: Exception) -> click.ClickException:
    logger.error(f"{type(e).__name__}: {e}")
    return click.ClickException(str(e))


def _finish(certificate: Optional[Certificate]):
    if certificate is None or not certificate.certified:
        click.get_current_context().exit(EXIT_UNCERTIFIED)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    """Certified low-rank approximation of third-order symmetric tensors."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--rank", "-r", type=int, required=True, help="Target rank r.")
@click.option("--sigma", type=float, default=None, help="Trace penalty σ (default 1e-5).")
@click.option("--tol", type=float, default=None, help="KKT tolerance of the inner solver.")
@click.option("--seed", type=int, default=0, envvar="TENSOR_CERT_SEED", show_default=True)
@click.option("--starts", type=int, default=1, envvar="TENSOR_CERT_STARTS", show_default=True,
              help="Number of concurrent random starts.")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True)
@click.option("--dump-moments", type=click.Path(dir_okay=False), default=None,
              help="Write the selected moment vector as JSON.")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Also write the JSON report to this file.")
@click.option("--timings", is_flag=True, help="Include wall-clock timings in JSON output.")
def approx(file: str, rank: int, sigma: Optional[float], tol: Optional[float], seed: int, starts: int,
           fmt: str, dump_moments: Optional[str], output: Optional[str], timings: bool):
    """Approximate FILE at rank r, extract atoms and certify."""
    try:
        tensor = load_tensor(file)
        overrides = {"seed": seed}
        if sigma is not None:
            overrides["sigma"] = sigma
        if tol is not None:
            overrides["tol_kkt"] = tol
        options = SolverOptions(**overrides)
        multistart = MultistartConfig(starts=starts, seed=seed)
        graph = CertificationGraph(tensor, rank, options=options, multistart=multistart)
        state = asyncio.run(graph.execute())
        report = build_report(tensor, rank, state, source=str(file), seed=seed)
        if dump_moments:
            save_moments(state["solution"].y, dump_moments)
        if output:
            Path(output).write_text(report.to_json(timings=timings) + "\n")
    except (TensorCertError, ValidationError, ValueError, OSError) as e:
        raise _fail(e)

    click.echo(report.to_json(timings=timings) if fmt == "json" else render_text(report))
    _finish(report.certificate)


@main.command()
@click.option("--which", default="all", show_default=True, help="Example number 1-7 or 'all'.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for CSV artifacts.")
@click.option("--seed", type=int, default=0, envvar="TENSOR_CERT_SEED", show_default=True)
@click.option("--starts", type=int, default=1, envvar="TENSOR_CERT_STARTS", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True)
def examples(which: str, out_dir: Optional[str], seed: int, starts: int, fmt: str):
    """Reproduce the bundled examples and compare with golden values."""
    try:
        selected = list(EXAMPLES) if which == "all" else [int(w) for w in which.split(",")]
        outcomes = run_examples(selected, SolverOptions(seed=seed), starts=starts, seed=seed,
                                out_dir=Path(out_dir) if out_dir else None)
    except (TensorCertError, ValidationError, ValueError, OSError) as e:
        raise _fail(e)

    if fmt == "json":
        click.echo(json.dumps([o.model_dump() for o in outcomes], indent=2))
    else:
        click.echo(render_table(outcomes))
    if not all(o.passed for o in outcomes):
        click.get_current_context().exit(EXIT_UNCERTIFIED)


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--rank", "-r", type=int, default=1, show_default=True)
@click.option("--mode", type=click.Choice(["one", "als"]), default="one", show_default=True)
@click.option("--starts", type=int, default=10, show_default=True, help="Random starts for mode als.")
@click.option("--seed", type=int, default=0, envvar="TENSOR_CERT_SEED", show_default=True)
def oracle(file: str, rank: int, mode: str, starts: int, seed: int):
    """Brute-force baseline value for FILE."""
    try:
        tensor = load_tensor(file)
        if mode == "one":
            result = brute_rank_one(tensor, seed=seed)
        else:
            result = baseline_rank_r(tensor, rank, starts=starts, seed=seed)
    except (TensorCertError, ValidationError, ValueError, OSError) as e:
        raise _fail(e)

    payload = {"method": result.method, "value": result.value, "samples": result.samples, "seed": result.seed}
    if result.vector is not None:
        payload["vector"] = [float(v) for v in result.vector]
    if result.atoms is not None:
        payload["atoms"] = [{"weight": a.weight, "vector": [float(v) for v in a.vector]} for a in result.atoms]
    click.echo(json.dumps(payload, indent=2))


@main.command("certify")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--solution", type=click.Path(dir_okay=False), required=True,
              help="Report JSON produced by approx, or any file with atoms or (y, B, X, U, V, W).")
@click.option("--rank", "-r", type=int, default=None, help="Overrides the rank stored in the report.")
def certify_command(file: str, solution: str, rank: Optional[int]):
    """Certify a stored candidate for FILE without solving."""
    try:
        tensor = load_tensor(file)
        report = RunReport.from_json(Path(solution).read_text())
        if report.input is not None and report.input.n != tensor.n:
            raise InputError(f"report is for n={report.input.n}, tensor has n={tensor.n}")
        certificate = certify_report(report, tensor, rank)
    except (TensorCertError, ValidationError, ValueError, OSError) as e:
        raise _fail(e)

    click.echo(render_certificate(certificate))
    _finish(certificate)
