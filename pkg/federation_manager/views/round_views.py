from typing import Sequence

from rich.console import Console
from rich.table import Table

from federation_manager.constants.metrics_fields import METRICS_DISPLAY_NAMES
from federation_manager.models.record_models import MetricsTable, RoundRecord

console = Console()


def _participants(record: RoundRecord) -> str:
    text = ", ".join(record.participants) or "-"
    if record.failed_clients:
        text += f" [red](échecs : {', '.join(record.failed_clients)})[/red]"
    return text


def display_round(record: RoundRecord) -> None:
    """Une ligne de progression par tour terminé."""
    console.print(
        f"[cyan]Tour {record.round}[/cyan] perte={record.global_loss:.4f} "
        f"précision={record.global_accuracy:.4f} "
        f"temps={record.round_virtual_time_s:.2f}s énergie={record.round_energy_j:.2f}J"
        + (f" [red]{len(record.failed_clients)} échec(s)[/red]" if record.failed_clients else "")
    )


def display_rounds_table(records: Sequence[RoundRecord], title: str = "Résultats par tour") -> None:
    """Show every round of a run."""
    table = Table(title=title)
    table.add_column(METRICS_DISPLAY_NAMES["round"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["global_loss"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["global_accuracy"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["round_virtual_time_s"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["round_energy_j"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["cum_virtual_time_s"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["cum_energy_j"], justify="right")
    table.add_column(METRICS_DISPLAY_NAMES["participants"])

    for record in records:
        table.add_row(
            str(record.round),
            f"{record.global_loss:.4f}",
            f"{record.global_accuracy:.4f}",
            f"{record.round_virtual_time_s:.2f}",
            f"{record.round_energy_j:.2f}",
            f"{record.cum_virtual_time_s:.2f}",
            f"{record.cum_energy_j:.2f}",
            _participants(record),
        )
    console.print(table)


def display_run_summary(metrics: MetricsTable) -> None:
    """Final accuracy, convergence time and energy, in the units of the report tables."""
    if not metrics.records:
        console.print("[yellow]Aucun tour exécuté.[/yellow]")
        return
    console.print(
        f"✅ {len(metrics.records)} tour(s), précision finale [bold]{metrics.final_accuracy:.4f}[/bold], "
        f"temps {metrics.total_virtual_time_s / 60.0:.2f} min, "
        f"énergie {metrics.total_energy_j / 1000.0:.2f} kJ "
        f"[grey58](mode {metrics.mode}, évaluation {metrics.evaluation})[/grey58]"
    )
