from __future__ import annotations

import logging
import os
from typing import List, Optional

import questionary
from rich.console import Console

from federation_manager.controllers.experiment_controller import run_experiment, summarize_sweep, sweep
from federation_manager.errors import FederationError
from federation_manager.models.experiment_config import ExperimentConfig, load_config_file
from federation_manager.models.metrics_repository import MetricsRepository
from federation_manager.utils.validators import parse_value_list
from federation_manager.views import experiment_views, round_views

logger = logging.getLogger(__name__)
console = Console()

CONFIG_DIR = "data/configs"
RESULTS_DIR = "data/results"


# ----------------------
# Helpers
# ----------------------

def list_configs(dir_path: str = CONFIG_DIR) -> List[str]:
    """JSON configs available in dir_path, sorted by name."""
    if not os.path.isdir(dir_path):
        return []
    return sorted(name for name in os.listdir(dir_path) if name.endswith(".json"))


def _select_config(dir_path: str) -> Optional[tuple]:
    choice = experiment_views.prompt_config_choice(list_configs(dir_path))
    if not choice or choice == "Retour":
        return None
    try:
        cfg = load_config_file(os.path.join(dir_path, choice))
    except FederationError as e:
        experiment_views.display_error_message(str(e))
        return None
    experiment_views.display_config_summary(cfg, choice)
    return choice, cfg


def run_and_save(cfg: ExperimentConfig, out_dir: str, show_rounds: bool = True) -> bool:
    """Run one experiment, show it and persist it; False on error."""
    try:
        table = run_experiment(cfg, on_round=round_views.display_round if show_rounds else None)
        MetricsRepository(out_dir).save_table(table)
    except FederationError as e:
        experiment_views.display_error_message(str(e))
        return False
    round_views.display_rounds_table(table.records)
    round_views.display_run_summary(table)
    experiment_views.display_success_message(f"Résultats écrits dans {out_dir}.")
    return True


def sweep_and_save(cfg: ExperimentConfig, factor: str, values: List[float], out_dir: str,
                   tau_class: str = "cpu") -> bool:
    """Run a sweep; every successful value is saved under out_dir/<factor>=<value>. False if any value failed."""
    repo = MetricsRepository(out_dir)
    try:
        outcomes = sweep(cfg, factor, values, tau_class)
    except FederationError as e:
        experiment_views.display_error_message(str(e))
        return False
    for outcome in outcomes:
        if outcome.ok:
            try:
                repo.sub_repository(f"{factor}={outcome.value:g}").save_table(outcome.table)
            except FederationError as e:
                experiment_views.display_error_message(str(e))
    experiment_views.display_sweep_summary(factor, summarize_sweep(outcomes))
    return all(o.ok for o in outcomes)


def _results_dir(config_name: str, suffix: str = "") -> str:
    stem = os.path.splitext(config_name)[0]
    return os.path.join(RESULTS_DIR, stem + (f"-{suffix}" if suffix else ""))


# ----------------------
# Menu
# ----------------------

def handle_main_menu(config_dir: str = CONFIG_DIR) -> None:
    """
    Top-level menu:
      - Run one experiment from a config
      - Sweep one factor of a config
      - Quit
    """
    while True:
        console.print("\n" + "-" * 60)
        action = questionary.select(
            "Que souhaitez-vous faire ?",
            choices=[
                {"name": "1. Lancer une expérience", "value": "run"},
                {"name": "2. Balayer un facteur (E, C ou τ)", "value": "sweep"},
                {"name": "3. Quitter", "value": "quit"},
            ],
        ).ask()

        if action in (None, "quit"):
            console.print("[cyan]Au revoir ![/cyan]")
            return

        selected = _select_config(config_dir)
        if selected is None:
            continue
        name, cfg = selected

        if action == "run":
            if questionary.confirm(f"Lancer {name} ({cfg.rounds} tours) ?").ask():
                run_and_save(cfg, _results_dir(name))
        elif action == "sweep":
            answer = experiment_views.prompt_sweep()
            if answer is None:
                continue
            factor, text = answer
            values = parse_value_list(text, as_int=factor != "tau")
            sweep_and_save(cfg, factor, values, _results_dir(name, factor))
