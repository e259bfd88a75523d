"""
Experiment harness: dataset → shards → clients → federation → MetricsTable,
in-process or over TCP with one client subprocess per profile.
"""
from __future__ import annotations

import logging
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from federation_manager.constants.config_keys import SWEEP_FACTORS
from federation_manager.controllers.client_controller import FederatedClient
from federation_manager.controllers.client_manager import ClientManager, InProcessClientProxy
from federation_manager.controllers.server_controller import RoundCallback, run_federation
from federation_manager.controllers.simulation_controller import SimulatedClient
from federation_manager.controllers.transport_controller import TcpFederationServer
from federation_manager.errors import ConfigValidationError, FederationError, SpawnError
from federation_manager.models.dataset_models import Shard, generate_dataset, partition, save_shard
from federation_manager.models.experiment_config import ExperimentConfig, StrategyConfig, config_hash
from federation_manager.models.head_models import HeadModel, head_accuracy, head_loss_grad
from federation_manager.models.record_models import FederationResult, MetricsTable
from federation_manager.models.tensor_models import Parameters
from federation_manager.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[2]
MAIN_SCRIPT = PROJECT_ROOT / "main.py"
SPAWN_TIMEOUT_S = 60.0
TEARDOWN_TIMEOUT_S = 10.0
POLL_S = 0.1


def build_shards(cfg: ExperimentConfig) -> List[Shard]:
    features, labels = generate_dataset(cfg.dataset)
    return partition(
        features,
        labels,
        len(cfg.clients),
        cfg.partition.scheme,
        seed=cfg.seeds.data,
        alpha=cfg.partition.alpha,
        n_classes=cfg.dataset.n_classes,
    )


def client_init_seed(cfg: ExperimentConfig) -> int:
    """Same seed as the server-side init, so both initial-parameter sources agree."""
    return derive_seed(cfg.seeds.model, "init")


def build_clients(cfg: ExperimentConfig, shards: Sequence[Shard]) -> List[SimulatedClient]:
    init_seed = client_init_seed(cfg)
    return [
        SimulatedClient(FederatedClient(shards[profile.shard_index], init_seed), profile)
        for profile in cfg.clients
    ]


def centralized_evaluator(shards: Sequence[Shard]) -> Callable[[Parameters], Tuple[float, float]]:
    """Evaluate on the pooled test splits of every shard."""
    X = np.concatenate([s.test_features for s in shards])
    y = np.concatenate([s.test_labels for s in shards])

    def evaluate(parameters: Parameters) -> Tuple[float, float]:
        model = HeadModel.from_parameters(parameters)
        loss, _, _ = head_loss_grad(model.W, model.b, X, y)
        return float(loss), head_accuracy(model.W, model.b, X, y)

    return evaluate


# ----------------------
# Modes
# ----------------------

def _run_in_process(cfg: ExperimentConfig, shards: Sequence[Shard],
                    on_round: Optional[RoundCallback]) -> FederationResult:
    manager = ClientManager()
    for client in build_clients(cfg, shards):
        manager.register_client(InProcessClientProxy(client.client_id, client.handle, client.capabilities()))
    evaluator = centralized_evaluator(shards) if cfg.evaluation == "centralized" else None
    return run_federation(cfg, manager, evaluator, on_round)


def client_command(address: str, profile, shard_path: str, init_seed: int, log_level: str = "WARNING") -> List[str]:
    """Command line of one `main.py client` subprocess; floats go through repr to stay exact."""
    return [
        sys.executable, str(MAIN_SCRIPT),
        "--log-level", log_level,
        "client",
        "--server", address,
        "--client-id", profile.client_id,
        "--shard", shard_path,
        "--processor-class", profile.processor_class,
        "--seconds-per-sample", repr(float(profile.seconds_per_sample)),
        "--power-watts", repr(float(profile.power_watts)),
        "--init-seed", str(init_seed),
    ]


def _wait_for_clients(manager: ClientManager, processes: Sequence[subprocess.Popen], expected: int,
                      timeout: float) -> None:
    deadline = time.monotonic() + timeout
    while not manager.wait_for(expected, timeout=POLL_S):
        for process in processes:
            if process.poll() is not None:
                raise SpawnError(f"Un processus client s'est arrêté prématurément (code {process.returncode}).")
        if time.monotonic() >= deadline:
            raise SpawnError(f"{manager.num_available()}/{expected} client(s) connecté(s) après {timeout} s.")


def _teardown(processes: Sequence[subprocess.Popen]) -> None:
    for process in processes:
        try:
            process.wait(timeout=TEARDOWN_TIMEOUT_S)
        except subprocess.TimeoutExpired:
            logger.warning("Client process %d did not exit, terminating", process.pid)
            process.terminate()
            try:
                process.wait(timeout=TEARDOWN_TIMEOUT_S)
            except subprocess.TimeoutExpired:
                process.kill()


def _run_tcp(cfg: ExperimentConfig, shards: Sequence[Shard], on_round: Optional[RoundCallback],
             spawn_timeout: float) -> FederationResult:
    manager = ClientManager()
    processes: List[subprocess.Popen] = []
    init_seed = client_init_seed(cfg)
    with tempfile.TemporaryDirectory(prefix="fl-shards-") as workdir:
        server = TcpFederationServer(("127.0.0.1", 0), manager).start()
        try:
            host, port = server.address
            address = f"{host}:{port}"
            for profile in cfg.clients:
                shard_path = os.path.join(workdir, f"{profile.client_id}.shard")
                save_shard(shard_path, shards[profile.shard_index])
                command = client_command(address, profile, shard_path, init_seed)
                try:
                    processes.append(subprocess.Popen(command, cwd=str(PROJECT_ROOT)))
                except OSError as e:
                    raise SpawnError(f"Lancement impossible du client {profile.client_id} : {e}") from e
            _wait_for_clients(manager, processes, len(cfg.clients), spawn_timeout)
            evaluator = centralized_evaluator(shards) if cfg.evaluation == "centralized" else None
            return run_federation(cfg, manager, evaluator, on_round)
        finally:
            server.shutdown()
            _teardown(processes)


def run_experiment(cfg: ExperimentConfig, on_round: Optional[RoundCallback] = None,
                   spawn_timeout: float = SPAWN_TIMEOUT_S) -> MetricsTable:
    """
    Build data and clients per cfg, run the federation, return its MetricsTable.

    Raises:
        RoundFailed: Propagée depuis la boucle FL.
        SpawnError: Mode tcp, un client n'a pas pu démarrer ou se connecter.
    """
    logger.info("Experiment start: mode=%s, %d client(s), E=%d", cfg.mode, len(cfg.clients), cfg.local_epochs)
    shards = build_shards(cfg)
    if cfg.mode == "tcp":
        result = _run_tcp(cfg, shards, on_round, spawn_timeout)
    else:
        result = _run_in_process(cfg, shards, on_round)
    return MetricsTable(result.rounds, result.final_parameters, config_hash(cfg), cfg.mode, cfg.evaluation)


# ----------------------
# Sweeps
# ----------------------

@dataclass(frozen=True)
class SweepOutcome:
    """One value of a sweep: its table, or the error that stopped it."""
    value: float
    table: Optional[MetricsTable] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.table is not None


def apply_factor(cfg: ExperimentConfig, factor: str, value: float, tau_class: str = "cpu") -> ExperimentConfig:
    """
    Copy of cfg with one factor changed, everything else (seeds included) untouched.

    tau sets τ for tau_class and switches to the deadline strategy; classes
    without a τ get 0 (no cutoff).
    """
    if factor == "local_epochs":
        return cfg.with_values(local_epochs=int(value))
    if factor == "clients_per_round":
        floor = cfg.strategy.min_successful_clients
        strategy = cfg.strategy
        if floor is not None and floor > int(value):
            strategy = replace(strategy, min_successful_clients=int(value))
        return cfg.with_values(clients_per_round=int(value), strategy=strategy)
    if factor == "tau":
        taus = {c.processor_class: 0.0 for c in cfg.clients}
        taus.update(cfg.strategy.tau_by_class)
        taus[tau_class] = float(value)
        strategy = StrategyConfig("deadline", tuple(sorted(taus.items())), cfg.strategy.min_successful_clients)
        return cfg.with_values(strategy=strategy)
    raise ConfigValidationError(f"factor : {' ou '.join(SWEEP_FACTORS)} attendu (reçu {factor!r}).")


def sweep(cfg: ExperimentConfig, factor: str, values: Sequence[float], tau_class: str = "cpu",
          on_outcome: Optional[Callable[[SweepOutcome], None]] = None) -> List[SweepOutcome]:
    """
    One run_experiment per value. A failing value is recorded and the sweep
    goes on with the next one.

    Raises:
        ConfigValidationError: Liste vide ou facteur inconnu.
    """
    if factor not in SWEEP_FACTORS:
        raise ConfigValidationError(f"factor : {' ou '.join(SWEEP_FACTORS)} attendu (reçu {factor!r}).")
    if not values:
        raise ConfigValidationError("values : au moins une valeur est requise.")
    outcomes: List[SweepOutcome] = []
    for value in values:
        try:
            table = run_experiment(apply_factor(cfg, factor, value, tau_class))
            outcome = SweepOutcome(value, table)
        except FederationError as e:
            logger.error("Sweep %s=%s failed: %s", factor, value, e)
            outcome = SweepOutcome(value, error=str(e))
        outcomes.append(outcome)
        if on_outcome is not None:
            on_outcome(outcome)
    return outcomes


def summarize_sweep(outcomes: Sequence[SweepOutcome]) -> List[dict]:
    """
    One summary row per value: final accuracy, time (min), energy (kJ) and
    time ratio relative to the first successful value.
    """
    baseline = next((o.table.total_virtual_time_s for o in outcomes if o.ok), None)
    rows = []
    for outcome in outcomes:
        if not outcome.ok:
            rows.append({"value": outcome.value, "error": outcome.error})
            continue
        table = outcome.table
        ratio = table.total_virtual_time_s / baseline if baseline else float("nan")
        rows.append({
            "value": outcome.value,
            "accuracy": table.final_accuracy,
            "time_min": table.total_virtual_time_s / 60.0,
            "energy_kj": table.total_energy_j / 1000.0,
            "time_ratio": ratio,
        })
    return rows
