"""CLI commands for fdtransport."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from fdtransport.errors import TransportError, exit_code_for

app = typer.Typer(
    name="fdtransport",
    help="Finite difference transport solvers - explicit, implicit and level-set studies",
    no_args_is_help=True,
)
console = Console()


def _setup_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _load(config_path: Optional[Path], overrides: dict | None = None):
    """Load config and discover presets."""
    from fdtransport.config import load_config
    from fdtransport.presets.registry import auto_discover

    config = load_config(config_path, overrides)
    auto_discover()
    return config


def _overrides(
    scheme: Optional[str],
    h: Optional[float],
    output: Optional[str],
    name: Optional[str],
) -> dict:
    out: dict = {}
    if scheme:
        out["scheme"] = scheme
    if h is not None:
        out["grid"] = {"h": h, "resolution": None}
    if output:
        out["output"] = {"directory": output}
    if name:
        out.setdefault("output", {})["name"] = name
    return out


def _fail(exc: BaseException) -> None:
    code = exit_code_for(exc)
    console.print(f"[bold red]{type(exc).__name__}[/bold red] (exit {code}): {exc}")
    raise typer.Exit(code)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@app.command()
def run(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="YAML run config"),
    scheme: Optional[str] = typer.Option(None, "--scheme", "-s", help="explicit or implicit"),
    h: Optional[float] = typer.Option(None, "--h", help="grid spacing (overrides grid section)"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="output directory"),
    name: Optional[str] = typer.Option(None, "--name", "-n", help="run name (subdirectory)"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Run one configured simulation and write its artifacts."""
    _setup_logging(verbose)
    try:
        cfg = _load(config, _overrides(scheme, h, output, name))
        from fdtransport.study.runner import run_pipeline

        with console.status(f"Running {cfg.scheme.value} scheme at h={cfg.h:g}..."):
            result = run_pipeline(cfg)
    except TransportError as e:
        _fail(e)
        return

    title = f"Run {result.store.manifest.name}"
    table = Table(title=title, show_header=True, header_style="bold cyan")
    table.add_column("Quantity", style="bold")
    table.add_column("Value", justify="right")
    for k, v in result.summary.items():
        table.add_row(k, _fmt(v))
    console.print(table)
    n_files = len(result.store.manifest.files)
    console.print(f"[bold]Manifest:[/bold] {result.manifest} ({n_files} files)")


@app.command()
def study(
    resolutions: list[float] = typer.Argument(..., help="grid spacings h, coarse to fine"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="YAML run config"),
    scheme: Optional[str] = typer.Option(None, "--scheme", "-s", help="explicit or implicit"),
    compare: bool = typer.Option(False, "--compare", help="run both schemes side by side"),
    processes: int = typer.Option(1, "--processes", "-p", help="parallel resolution runs"),
    output: Optional[str] = typer.Option(None, "--output", "-o", help="output directory"),
    name: Optional[str] = typer.Option(None, "--name", "-n", help="study name"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Convergence study over several resolutions."""
    _setup_logging(verbose)
    try:
        cfg = _load(config, _overrides(scheme, None, output, None))
        from fdtransport.study.convergence import compare_schemes, convergence_study

        with console.status(f"Running {len(resolutions)} resolutions..."):
            if compare:
                df = compare_schemes(cfg, resolutions, processes, name)
                orders = {}
            else:
                result = convergence_study(cfg, resolutions, processes, name)
                df, orders = result.table, result.orders
    except TransportError as e:
        _fail(e)
        return

    table = Table(title="Convergence", show_header=True, header_style="bold cyan")
    cols = [c for c in df.columns if not c.endswith("_order")]
    for c in cols:
        table.add_column(c, justify="right")
    for _, row in df.iterrows():
        table.add_row(*[_fmt(row[c]) for c in cols])
    console.print(table)
    if orders:
        fitted = ", ".join(f"{k}={v:.3f}" for k, v in orders.items())
        console.print(f"[bold]Fitted orders:[/bold] {fitted}")


@app.command("validate-config")
def validate_config(
    config: Path = typer.Argument(..., help="YAML run config"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Validate a config file without running it."""
    _setup_logging(verbose)
    try:
        cfg = _load(config)
        from fdtransport.study.runner import build_problem

        problem = build_problem(cfg)
    except TransportError as e:
        _fail(e)
        return
    console.print(f"[green]OK[/green] {config}: {cfg.scheme.value} h={cfg.h:g} "
                  f"tau={problem.timegrid.tau:.6g} steps={problem.timegrid.num_steps} "
                  f"|Omega_h|={int(problem.mask.interior.sum())}")


@app.command()
def presets(
    kind: Optional[str] = typer.Option(None, "--kind", "-k", help="velocity or initial"),
):
    """List available presets."""
    from fdtransport.presets.registry import auto_discover, list_presets

    auto_discover()
    items = list_presets(kind)

    table = Table(title="Presets", show_header=True, header_style="bold cyan")
    table.add_column("Name", style="bold")
    table.add_column("Kind")
    table.add_column("Smooth", justify="center")
    table.add_column("Description")
    table.add_column("Parameters")

    for p in items:
        params_str = ", ".join(f"{q['name']}={q['default']}" for q in p["parameters"])
        smooth = "yes" if p["smooth"] else "no"
        table.add_row(p["name"], p["kind"], smooth, p["description"], params_str)

    console.print(table)


if __name__ == "__main__":
    app()
