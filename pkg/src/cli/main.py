"""Main CLI application entry point."""
import typer
from rich.console import Console

from src.cli import commands
from src.config import settings
from src.engine.observability import configure_logging

app = typer.Typer(
    name="top-eval",
    help="FAR-constrained evaluation harness for Temporal Occurrence Prediction",
    add_completion=False,
)

app.add_typer(commands.simulate_app, name="simulate", help="Synthetic dataset commands")
app.add_typer(commands.eval_app, name="eval", help="Evaluation commands")
app.add_typer(commands.labels_app, name="labels", help="Training label commands")
app.add_typer(commands.manifest_app, name="manifest", help="Manifest commands")

console = Console()


@app.callback()
def configure(
    log_level: str = typer.Option(settings.log_level, "--log-level", help="Logging level"),
):
    """Set up logging before any command runs."""
    configure_logging(log_level)


@app.command()
def version():
    """Show version information."""
    console.print("top-anticipation-eval version 0.1.0")


def main():
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
