import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

from rich.console import Console

from federation_manager.constants.config_keys import (
    DEFAULT_BIND,
    DEFAULT_POWER_WATTS,
    DEFAULT_PROCESSOR_CLASS,
    DEFAULT_SECONDS_PER_SAMPLE,
    STRATEGY_TYPES,
    SWEEP_FACTORS,
)
from federation_manager.controllers.client_controller import FederatedClient, start_client
from federation_manager.controllers.client_manager import ClientManager
from federation_manager.controllers.main_controller import handle_main_menu, run_and_save, sweep_and_save
from federation_manager.controllers.server_controller import run_federation
from federation_manager.controllers.simulation_controller import SimulatedClient
from federation_manager.controllers.transport_controller import TcpFederationServer
from federation_manager.errors import FederationError
from federation_manager.models.dataset_models import load_shard
from federation_manager.models.experiment_config import ExperimentConfig, config_hash, load_config_file
from federation_manager.models.metrics_repository import MetricsRepository
from federation_manager.models.profile_models import ClientProfile
from federation_manager.models.record_models import MetricsTable
from federation_manager.utils.logging_utils import configure_logging
from federation_manager.utils.validators import parse_bind_address, parse_value_list
from federation_manager.views import round_views
from federation_manager.views.experiment_views import display_banner

logger = logging.getLogger("federation_manager.main")
console = Console(stderr=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Apprentissage fédéré : serveur, clients, expériences et balayages.",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="Lancer une expérience depuis un fichier de configuration.")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default="data/results/run")

    sw = sub.add_parser("sweep", help="Faire varier un facteur (E, C ou τ).")
    sw.add_argument("--config", required=True)
    sw.add_argument("--factor", required=True, choices=SWEEP_FACTORS)
    sw.add_argument("--values", required=True, help="ex. 1,5,10")
    sw.add_argument("--tau-class", default="cpu", help="Classe de processeur visée par --factor tau.")
    sw.add_argument("--out", default="data/results/sweep")

    serve = sub.add_parser("serve", help="Serveur TCP pour des clients externes.")
    serve.add_argument("--bind", default=DEFAULT_BIND)
    serve.add_argument("--rounds", type=int)
    serve.add_argument("--min-clients", type=int)
    serve.add_argument("--strategy", choices=STRATEGY_TYPES)
    serve.add_argument("--config")
    serve.add_argument("--out", default="data/results/serve")
    serve.add_argument("--wait-timeout", type=float, default=300.0)

    client = sub.add_parser("client", help="Client TCP simulé sur un shard.")
    client.add_argument("--server", required=True)
    client.add_argument("--client-id", required=True)
    client.add_argument("--shard", required=True)
    client.add_argument("--processor-class", default=DEFAULT_PROCESSOR_CLASS)
    client.add_argument("--seconds-per-sample", type=float, default=DEFAULT_SECONDS_PER_SAMPLE)
    client.add_argument("--power-watts", type=float, default=DEFAULT_POWER_WATTS)
    client.add_argument("--init-seed", type=int, default=0)
    client.add_argument("--connect-timeout", type=float, default=30.0)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config_file(args.config)
    return 0 if run_and_save(cfg, args.out) else 1


def _cmd_sweep(args) -> int:
    cfg = load_config_file(args.config)
    try:
        values = parse_value_list(args.values, as_int=args.factor != "tau")
    except ValueError as e:
        console.print(f"❌ [red]Erreur : {e}[/red]")
        return 2
    return 0 if sweep_and_save(cfg, args.factor, values, args.out, args.tau_class) else 1


def _cmd_serve(args) -> int:
    cfg = load_config_file(args.config) if args.config else ExperimentConfig()
    strategy = cfg.strategy
    if args.strategy:
        strategy = replace(strategy, type=args.strategy)
    wait_for = cfg.clients_per_round
    if args.min_clients:
        wait_for = args.min_clients
        strategy = replace(strategy, min_successful_clients=min(args.min_clients, cfg.clients_per_round))
    changes = {"strategy": strategy, "mode": "tcp"}
    if args.rounds is not None:
        changes["rounds"] = args.rounds
    if cfg.evaluation == "centralized":
        logger.warning("Centralized evaluation needs the shards; using federated evaluation")
        changes["evaluation"] = "federated"
    cfg = cfg.with_values(**changes)

    manager = ClientManager()
    with TcpFederationServer(parse_bind_address(args.bind), manager):
        console.print(f"En attente de {wait_for} client(s) sur {args.bind}...")
        if not manager.wait_for(wait_for, args.wait_timeout):
            console.print(f"❌ [red]Erreur : {manager.num_available()} client(s) après {args.wait_timeout} s.[/red]")
            return 1
        result = run_federation(cfg, manager, on_round=round_views.display_round)
    table = MetricsTable(result.rounds, result.final_parameters, config_hash(cfg), cfg.mode, cfg.evaluation)
    MetricsRepository(args.out).save_table(table)
    round_views.display_run_summary(table)
    return 0


def _cmd_client(args) -> int:
    shard = load_shard(args.shard)
    profile = ClientProfile(args.client_id, args.processor_class, args.seconds_per_sample, args.power_watts)
    simulated = SimulatedClient(FederatedClient(shard, args.init_seed), profile)
    start_client(args.server, simulated.handle, args.client_id, profile.capabilities(), args.connect_timeout)
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "serve": _cmd_serve, "client": _cmd_client}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Point d'entrée principal. Sans sous-commande, affiche la bannière et le menu interactif.
    """

    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    if args.command is None:
        display_banner()
        handle_main_menu()
        return 0

    try:
        return COMMANDS[args.command](args)
    except FederationError as e:
        console.print(f"❌ [red]Erreur : {e}[/red]")
        return 1
    except (OSError, ValueError) as e:
        console.print(f"❌ [red]Erreur : {e}[/red]")
        return 1
    except KeyboardInterrupt:
        console.print("[yellow]Interrompu par l'utilisateur.[/yellow]")
        return 130


if __name__ == "__main__":
    sys.exit(main())
