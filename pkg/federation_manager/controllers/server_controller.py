"""
FL loop: sample → configure_fit → concurrent dispatch → barrier → aggregate →
evaluate → RoundRecord. Every decision is delegated to the Strategy.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from federation_manager.constants.config_keys import KEY_ACCURACY, KEY_ENERGY_J, KEY_VIRTUAL_TIME_S
from federation_manager.controllers.client_manager import ClientManager, ClientProxy, sample_from
from federation_manager.controllers.simulation_controller import round_energy, round_time
from federation_manager.controllers.strategy_controller import Strategy, build_strategy
from federation_manager.errors import (
    EmptyResults,
    FederationError,
    InsufficientClients,
    InsufficientResults,
    RoundFailed,
)
from federation_manager.models.head_models import init_head
from federation_manager.models.message_models import FitRes
from federation_manager.models.record_models import EvaluateOutcome, FederationResult, FitOutcome, RoundRecord
from federation_manager.models.tensor_models import Parameters
from federation_manager.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

# Pooled test-split evaluation: parameters -> (loss, accuracy)
CentralizedEvaluator = Callable[[Parameters], Tuple[float, float]]
RoundCallback = Callable[[RoundRecord], None]


def _metric(res: FitRes, key: str) -> float:
    value = res.metrics.get(key, 0.0)
    return float(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else 0.0


class FlServer:
    """
    Boucle d'apprentissage fédéré.

    Args:
        client_manager: Registre des clients.
        strategy: Stratégie configurée.
        clients_per_round: C, clients sélectionnés par tour.
        sampling_seed: Graine de l'échantillonnage des clients.
        request_timeout_s: Garde-fou en temps réel par requête fit/evaluate.
        centralized_evaluator: Si fourni, remplace l'évaluation fédérée.
    """

    def __init__(
        self,
        client_manager: ClientManager,
        strategy: Strategy,
        clients_per_round: int,
        sampling_seed: int = 0,
        request_timeout_s: Optional[float] = None,
        centralized_evaluator: Optional[CentralizedEvaluator] = None,
    ) -> None:
        self.client_manager = client_manager
        self.strategy = strategy
        self.clients_per_round = clients_per_round
        self.sampling_seed = sampling_seed
        self.request_timeout_s = request_timeout_s
        self.centralized_evaluator = centralized_evaluator
        self.parameters = Parameters([])
        self.cum_virtual_time_s = 0.0
        self.cum_energy_j = 0.0

    # ----------------------
    # Helpers
    # ----------------------

    def _minimum_clients(self) -> int:
        floor = self.strategy.min_successful_clients
        return self.clients_per_round if floor is None else min(floor, self.clients_per_round)

    def _select(self, round: int, eligible: List[ClientProxy]) -> List[ClientProxy]:
        available = len(eligible)
        n = self.clients_per_round
        if available < n:
            if available < self._minimum_clients() or available == 0:
                raise InsufficientClients(
                    f"Tour {round} : {available} client(s) disponible(s), {self._minimum_clients()} requis."
                )
            n = available
        return sample_from(eligible, n, derive_seed(self.sampling_seed, "sample", round))

    def _drop_if_broken(self, proxy: ClientProxy) -> None:
        if proxy.broken:
            self.client_manager.unregister(proxy.client_id)

    def _dispatch(self, calls: Sequence[Tuple[ClientProxy, Callable[[], object]]]) -> Dict[str, object]:
        """Run one request per client concurrently; exceptions are returned, not raised."""
        outcomes: Dict[str, object] = {}
        if not calls:
            return outcomes
        with ThreadPoolExecutor(max_workers=len(calls), thread_name_prefix="fl-dispatch") as pool:
            futures = {proxy.client_id: pool.submit(call) for proxy, call in calls}
            # barrier: every selected client has answered or failed before we go on
            for client_id, future in futures.items():
                try:
                    outcomes[client_id] = future.result()
                except Exception as e:
                    outcomes[client_id] = e
        return outcomes

    # ----------------------
    # Round phases
    # ----------------------

    def _fit_phase(
        self, round: int, selected: List[ClientProxy]
    ) -> Tuple[List[FitOutcome], List[str], List[FitRes]]:
        proxies = {p.client_id: p for p in selected}
        instructions = self.strategy.configure_fit(round, self.parameters, selected)
        calls = [
            (proxies[cid], (lambda p=proxies[cid], ins=ins: p.fit(ins, self.request_timeout_s)))
            for cid, ins in instructions
        ]
        answers = self._dispatch(calls)

        results: List[FitOutcome] = []
        failures: List[str] = []
        responded: List[FitRes] = []
        for client_id in sorted(answers):
            answer = answers[client_id]
            if isinstance(answer, Exception):
                logger.warning("Round %d: client %s failed: %s", round, client_id, answer)
                failures.append(client_id)
                self._drop_if_broken(proxies[client_id])
                continue
            responded.append(answer)
            if answer.failed or answer.num_examples == 0:
                logger.warning("Round %d: client %s returned no training", round, client_id)
                failures.append(client_id)
                continue
            if not self.parameters.is_shape_compatible(answer.parameters):
                logger.warning("Round %d: client %s returned incompatible shapes", round, client_id)
                failures.append(client_id)
                continue
            results.append(FitOutcome(client_id, answer.parameters, answer.num_examples, answer.metrics))
        return results, failures, responded

    def _evaluate_phase(self, round: int, eligible: List[ClientProxy]) -> Tuple[float, float]:
        if self.centralized_evaluator is not None:
            return self.centralized_evaluator(self.parameters)
        # clients dropped during the fit phase are skipped
        clients = [p for p in eligible if self.client_manager.get(p.client_id) is p]
        proxies = {p.client_id: p for p in clients}
        instructions = self.strategy.configure_evaluate(round, self.parameters, clients)
        calls = [
            (proxies[cid], (lambda p=proxies[cid], ins=ins: p.evaluate(ins, self.request_timeout_s)))
            for cid, ins in instructions
        ]
        answers = self._dispatch(calls)
        outcomes: List[EvaluateOutcome] = []
        for client_id in sorted(answers):
            answer = answers[client_id]
            if isinstance(answer, Exception):
                logger.warning("Round %d: evaluation failed on %s: %s", round, client_id, answer)
                self._drop_if_broken(proxies[client_id])
                continue
            if answer.num_examples == 0:
                continue
            accuracy = answer.metrics.get(KEY_ACCURACY, 0.0)
            outcomes.append(EvaluateOutcome(client_id, answer.loss, answer.num_examples, float(accuracy)))
        try:
            return self.strategy.aggregate_evaluate(round, outcomes)
        except EmptyResults as e:
            raise RoundFailed(f"Tour {round} : aucune évaluation exploitable.") from e

    def run_round(self, round: int) -> RoundRecord:
        """
        One synchronous round.

        Raises:
            RoundFailed: Moins de résultats que le minimum de la stratégie.
        """
        eligible = self.client_manager.all_clients()
        try:
            selected = self._select(round, eligible)
        except InsufficientClients as e:
            raise RoundFailed(str(e)) from e
        logger.info("Round %d: %d client(s) selected", round, len(selected))

        results, failures, responded = self._fit_phase(round, selected)
        try:
            self.parameters = self.strategy.aggregate_fit(round, results, failures)
        except InsufficientResults as e:
            raise RoundFailed(str(e)) from e

        times = [_metric(res, KEY_VIRTUAL_TIME_S) for res in responded]
        energies = [_metric(res, KEY_ENERGY_J) for res in responded]
        round_time_s = round_time(times) if times else 0.0
        round_energy_j = round_energy(energies) if energies else 0.0
        self.cum_virtual_time_s += round_time_s
        self.cum_energy_j += round_energy_j

        loss, accuracy = self._evaluate_phase(round, eligible)
        record = RoundRecord(
            round=round,
            global_loss=float(loss),
            global_accuracy=float(accuracy),
            round_virtual_time_s=round_time_s,
            round_energy_j=round_energy_j,
            cum_virtual_time_s=self.cum_virtual_time_s,
            cum_energy_j=self.cum_energy_j,
            participants=tuple(r.client_id for r in results),
            failed_clients=tuple(failures),
        )
        logger.info(
            "Round %d: loss=%.4f accuracy=%.4f time=%.2fs energy=%.2fJ failures=%d",
            round, record.global_loss, record.global_accuracy, round_time_s, round_energy_j, len(failures),
        )
        return record

    def fetch_client_parameters(self) -> Parameters:
        """Initial parameters from the first registered client by id."""
        clients = self.client_manager.all_clients()
        if not clients:
            raise RoundFailed("Aucun client pour fournir les paramètres initiaux.")
        return clients[0].get_parameters(self.request_timeout_s)

    def run(self, rounds: int, initial_parameters: Parameters,
            on_round: Optional[RoundCallback] = None) -> FederationResult:
        """Rounds 1..rounds; the first RoundFailed aborts the federation."""
        self.parameters = initial_parameters
        self.cum_virtual_time_s = 0.0
        self.cum_energy_j = 0.0
        records: List[RoundRecord] = []
        for round in range(1, rounds + 1):
            record = self.run_round(round)
            records.append(record)
            if on_round is not None:
                on_round(record)
        return FederationResult(self.parameters, tuple(records))


def initial_parameters_for(cfg, server: FlServer) -> Parameters:
    if cfg.initial_parameters == "client":
        return server.fetch_client_parameters()
    model = init_head(cfg.dataset.n_features, cfg.dataset.n_classes, derive_seed(cfg.seeds.model, "init"))
    return model.to_parameters()


def run_federation(
    cfg,
    client_manager: ClientManager,
    centralized_evaluator: Optional[CentralizedEvaluator] = None,
    on_round: Optional[RoundCallback] = None,
) -> FederationResult:
    """
    Seeded initialization, then cfg.rounds rounds over the registered clients.

    Deterministic given cfg: sampling, per-client seeds and aggregation order
    depend only on the seeds and client ids.
    """
    strategy = build_strategy(cfg)
    server = FlServer(
        client_manager,
        strategy,
        cfg.clients_per_round,
        sampling_seed=cfg.seeds.sampling,
        request_timeout_s=cfg.effective_round_timeout(),
        centralized_evaluator=centralized_evaluator,
    )
    try:
        initial = initial_parameters_for(cfg, server)
    except FederationError as e:
        raise RoundFailed(f"Paramètres initiaux indisponibles : {e}") from e
    logger.info("Federation start: %d round(s), strategy=%s", cfg.rounds, getattr(strategy, "name", "?"))
    result = server.run(cfg.rounds, initial, on_round)
    if result.final_record is not None:
        logger.info("Federation done: accuracy=%.4f", result.final_record.global_accuracy)
    return result

