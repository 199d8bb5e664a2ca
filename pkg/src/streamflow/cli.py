"""Command line: run the server, generate and inspect topologies, benchmark.

Every option can also come from an environment variable named ``SF_`` plus
the flag name, e.g. ``SF_WORKERS=4`` or ``SF_QUEUE_CAPACITY=1024``.
"""
from __future__ import annotations

import json
import logging
import os
import sys

import click

from .errors import InfeasibleKnobs
from .topo import (
    GeneratorKnobs,
    TopologySpec,
    compute_metrics,
    emit_report,
    generate_family,
    generate_random,
    run_benchmark,
)


def option(*decls, **kwargs):
    """``click.option`` that also reads ``SF_<FLAG>`` from the environment."""
    flag = next(d for d in decls if d.startswith("--")).split("/")[0]
    kwargs.setdefault("envvar", "SF_" + flag[2:].replace("-", "_").upper())
    kwargs.setdefault("show_envvar", True)
    return click.option(*decls, **kwargs)


@click.group(context_settings={"show_default": True})
@option("--log-level", default="WARNING", help="Python logging level.")
def main(log_level: str) -> None:
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@option("--bind", default="127.0.0.1:8080", help="host:port to listen on.")
@option("--workers", type=click.IntRange(min=1), default=os.cpu_count() or 1)
@option("--queue-capacity", type=click.IntRange(min=1), default=65536)
@option("--store", "store", default="mem", help="'mem' or a directory for the file store.")
@option("--callback-timeout-ms", type=click.IntRange(min=1), default=2000)
def serve(bind: str, workers: int, queue_capacity: int, store: str, callback_timeout_ms: int) -> None:
    """Serve the REST API."""
    import uvicorn

    from .api import ApiConfig, create_app

    try:
        config = ApiConfig(bind, workers, queue_capacity, None if store == "mem" else store,
                           callback_timeout_ms)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None
    uvicorn.run(create_app(config=config), host=config.host, port=config.port, log_level="info")


@main.command()
@option("--streams", type=click.IntRange(min=1), required=True)
@option("--composite", type=click.IntRange(min=0), required=True)
@option("--operands", type=click.IntRange(min=1), default=1, help="Operands per composite (minimum).")
@option("--max-operands", type=click.IntRange(min=1), default=None,
              help="Draw operand counts uniformly up to this value.")
@option("--dist", type=click.Choice(["uniform", "skewed"]), default="uniform")
@option("--exponent", type=float, default=1.0, help="Power-law exponent for --dist skewed.")
@option("--seed", type=int, default=0)
@option("--cycles/--no-cycles", default=False)
@option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def topogen(streams, composite, operands, max_operands, dist, exponent, seed, cycles, output) -> None:
    """Generate a random topology."""
    try:
        spec = generate_random(
            GeneratorKnobs(streams, composite, operands, max_operands, dist, exponent, cycles, seed))
    except InfeasibleKnobs as exc:
        raise click.UsageError(str(exc)) from None
    if output:
        spec.save(output)
    else:
        click.echo(json.dumps(spec.to_document(), indent=2))


@main.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
def metrics(spec_file: str) -> None:
    """Print degree and connectivity statistics of a topology."""
    click.echo(json.dumps(compute_metrics(TopologySpec.load(spec_file)).to_document(), indent=2))


@main.command()
@option("--family", type=click.Choice(["length", "in", "out", "random"]), required=True)
@option("--size", "sizes", type=click.IntRange(min=1), multiple=True,
              help="Family size; repeat for a sweep.")
@option("--spec", "spec_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Topology file for --family random.")
@option("--injections", type=click.IntRange(min=1), default=10)
@option("--rate", type=float, default=1.0, help="Updates per second in paced mode.")
@option("--workers", type=click.IntRange(min=1), default=os.cpu_count() or 1)
@option("--mode", type=click.Choice(["paced", "serial"]), default="paced")
@option("--store-latency-ms", type=click.FloatRange(min=0), default=0.0,
              help="Simulated round-trip per store read/append.")
@option("--format", "fmt", type=click.Choice(["csv", "table"]), default="csv")
@option("-o", "--outdir", type=click.Path(file_okay=False), default="bench-out")
def bench(family, sizes, spec_file, injections, rate, workers, mode, store_latency_ms, fmt, outdir) -> None:
    """Deploy topologies in-process and measure dispatch latency."""
    if family == "random":
        if spec_file is None:
            raise click.UsageError("--family random needs --spec")
        specs = [TopologySpec.load(spec_file)]
    else:
        if not sizes:
            raise click.UsageError("give at least one --size")
        specs = [generate_family(family, s) for s in sizes]
    reports = []
    for spec in specs:
        report = run_benchmark(spec, injections, rate, workers, mode,
                               store_latency_s=store_latency_ms / 1000)
        reports.append(report)
        for v in report.violations:
            click.echo(f"violation: {v}", err=True)
    paths = emit_report(reports, outdir, "csv")
    if fmt == "table":
        emit_report(reports, fmt="table", out=sys.stdout)
    else:
        click.echo("wrote " + ", ".join(str(p) for p in paths))
    if any(r.violations for r in reports):
        sys.exit(1)


if __name__ == "__main__":
    main()
