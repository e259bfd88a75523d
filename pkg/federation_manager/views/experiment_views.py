from datetime import datetime
from typing import List, Optional, Sequence

import questionary
from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from federation_manager import __version__
from federation_manager.constants.config_keys import SWEEP_FACTORS
from federation_manager.models.experiment_config import ExperimentConfig
from federation_manager.utils.validators import is_valid_value_list

console = Console()

FACTOR_LABELS = {
    "local_epochs": "Époques locales (E)",
    "clients_per_round": "Clients par tour (C)",
    "tau": "Temps de coupure τ (s)",
}


def display_banner() -> None:
    title = f"[bold cyan]Federation Manager (v{__version__})[/bold cyan]"
    subtitle = "[cyan]Apprentissage fédéré simulé : précision, temps et énergie[/cyan]"
    timestamp = datetime.now().strftime("%Y-%m-%d")
    panel = Panel(
        Align.center(f"{title}\n{subtitle}\n[grey58]{timestamp}[/grey58]", vertical="middle"),
        border_style="cyan",
        padding=(1, 4),
        width=72,
        subtitle="Bienvenue",
    )
    console.print("\n")
    console.print(panel)


def display_config_summary(cfg: ExperimentConfig, name: str = "") -> None:
    """Les facteurs principaux d'une configuration."""
    table = Table(title=f"Configuration {name}".strip())
    table.add_column("Paramètre")
    table.add_column("Valeur", justify="right")
    classes = sorted({c.processor_class for c in cfg.clients})
    rows = [
        ("Tours", str(cfg.rounds)),
        ("Clients", f"{len(cfg.clients)} ({', '.join(classes)})"),
        ("Clients par tour (C)", str(cfg.clients_per_round)),
        ("Époques locales (E)", str(cfg.local_epochs)),
        ("Taux d'apprentissage", f"{cfg.learning_rate:g}"),
        ("Taille de lot", str(cfg.batch_size)),
        ("Stratégie", cfg.strategy.type),
        ("Partition", cfg.partition.scheme),
        ("Mode", cfg.mode),
        ("Évaluation", cfg.evaluation),
    ]
    for class_name, tau in cfg.strategy.tau_seconds_by_class:
        rows.append((f"τ {class_name}", f"{tau:g} s"))
    for label, value in rows:
        table.add_row(label, value)
    console.print(table)


def display_sweep_summary(factor: str, rows: Sequence[dict]) -> None:
    """Comparison of a sweep: accuracy, time (min), energy (kJ) and time ratio to the first value."""
    table = Table(title=f"Balayage : {FACTOR_LABELS.get(factor, factor)}")
    table.add_column(FACTOR_LABELS.get(factor, factor), justify="right")
    table.add_column("Précision", justify="right")
    table.add_column("Temps (min)", justify="right")
    table.add_column("Énergie (kJ)", justify="right")
    table.add_column("Ratio temps", justify="right")
    for row in rows:
        if "error" in row:
            table.add_row(f"{row['value']:g}", f"[red]{row['error']}[/red]", "-", "-", "-")
            continue
        table.add_row(
            f"{row['value']:g}",
            f"{row['accuracy']:.4f}",
            f"{row['time_min']:.2f}",
            f"{row['energy_kj']:.2f}",
            f"{row['time_ratio']:.2f}x",
        )
    console.print(table)


def display_error_message(reason: str) -> None:
    console.print(f"❌ [red]Erreur : {reason}[/red]")


def display_success_message(message: str) -> None:
    console.print(f"✅ [green]{message}[/green]")


# --------------------
# Prompts
# --------------------

def prompt_config_choice(names: List[str]) -> Optional[str]:
    if not names:
        display_error_message("Aucune configuration dans data/configs.")
        return None
    return questionary.select("Quelle configuration ?", choices=names + ["Retour"]).ask()


def prompt_sweep() -> Optional[tuple]:
    """Ask for a factor and its values; None if the user backs out."""
    factor = questionary.select(
        "Facteur à faire varier :",
        choices=[questionary.Choice(FACTOR_LABELS[f], value=f) for f in SWEEP_FACTORS],
    ).ask()
    if factor is None:
        return None
    as_int = factor != "tau"
    values = questionary.text(
        "Valeurs (séparées par des virgules) :",
        validate=lambda text: is_valid_value_list(text, as_int) or "Liste de nombres attendue, ex. 1,5,10",
    ).ask()
    if values is None:
        return None
    return factor, values
