import math
import os
from typing import Sequence

from coop_forecaster.Association.pruning import candidate_pairs
from coop_forecaster.Association.pseudo_labels import ScenarioLabels
from coop_forecaster.config import (DEFAULT_EVAL_CONFIG, DEFAULT_MODEL_CONFIG, DEFAULT_TRAIN_CONFIG, EvalConfig,
                                    ModelConfig, TrainConfig)
from coop_forecaster.Evaluation.harness import evaluate
from coop_forecaster.Model.network import NO_ABLATION, AblationSwitches, V2XGraphForecaster, init_params, model_forward
from coop_forecaster.Model.scene_graph import MIN_TRACK_FRAMES
from coop_forecaster.Numerics.checkpoint import save_checkpoint
from coop_forecaster.Numerics.optim import AdamState, adamw_step, clip_grad_norm, cosine_lr
from coop_forecaster.Numerics.params import ParamStore, Rng
from coop_forecaster.Numerics.tensor import Tape, backward
from coop_forecaster.Scenario.dataset import take_fraction
from coop_forecaster.Scenario.types import Scenario, TrackKey
from coop_forecaster.Training.losses import combine_terms, scenario_loss_terms
from coop_forecaster.Utils.errors import DataError, NumericDomainError, NumericFailure
from coop_forecaster.Utils.history_logger import HistoryLogger
from coop_forecaster.Utils.logger import Logger

PairKey = tuple[TrackKey, TrackKey]
DISTURBANCE_STREAM = 0x5EED_D157  # Offset that keeps label flips off the shuffling streams


def disturb_labels(scenarios: Sequence[Scenario], positives: dict[str, set[PairKey]], probability: float,
                   seed: int) -> dict[str, set[PairKey]]:
    """Flip every candidate pair's label independently with `probability` (seeded, scenario-id order)."""
    if probability <= 0.0:
        return positives
    rng = Rng(seed + DISTURBANCE_STREAM)
    disturbed = {}
    for scenario in sorted(scenarios, key=lambda s: s.scenario_id):
        labels = set(positives[scenario.scenario_id])
        for a, b in candidate_pairs(scenario):
            if scenario.track(a).n_observed < MIN_TRACK_FRAMES or scenario.track(b).n_observed < MIN_TRACK_FRAMES:
                continue
            if rng.random() < probability:
                labels ^= {(a, b)}
        disturbed[scenario.scenario_id] = labels
    return disturbed


class Trainer:
    def __init__(
        self,
        output_folder: str,
        model_config: ModelConfig = DEFAULT_MODEL_CONFIG,
        train_config: TrainConfig = DEFAULT_TRAIN_CONFIG,
        eval_config: EvalConfig = DEFAULT_EVAL_CONFIG,
        switches: AblationSwitches = NO_ABLATION,
        checkpoint_path: str | None = None
    ) -> None:
        self.model_config = model_config
        self.train_config = train_config
        self.eval_config = eval_config
        self.switches = switches
        self.checkpoint_path = checkpoint_path
        self.output_folder = output_folder
        self.logger = Logger(os.path.join(output_folder, 'app.log'))
        self.log_event = self.logger.log_event
        self.history_filename = os.path.join(output_folder, 'history.csv')
        self.history: list[dict] = []

    def _positives(self, scenarios: Sequence[Scenario], labels: dict[str, ScenarioLabels]) -> dict[str, set[PairKey]]:
        # Single-view scenarios have no view pair and therefore no label record
        missing = [s.scenario_id for s in scenarios if s.scenario_id not in labels and len(s.views) > 1]
        if missing:
            raise DataError(f"no pseudo labels for scenario {missing[0]} ({len(missing)} missing)")
        positives = {s.scenario_id: labels[s.scenario_id].positives() if s.scenario_id in labels else set()
                     for s in scenarios}
        return disturb_labels(scenarios, positives, self.train_config.label_disturbance, self.train_config.seed)

    def _save_last_good(self, params: ParamStore) -> None:
        if self.checkpoint_path:
            path = f"{self.checkpoint_path}.last_good"
            save_checkpoint(params, path)
            self.log_event(f"Last good parameters written to {path}")

    def _train_step(self, batch: list[Scenario], positives: dict[str, set[PairKey]], params: ParamStore,
                    state: AdamState, lr: float) -> dict[str, float]:
        cfg = self.train_config
        with Tape() as tape:
            terms = [
                scenario_loss_terms(scenario, model_forward(scenario, params, self.model_config, "train", self.switches),
                                    positives[scenario.scenario_id])
                for scenario in batch
            ]
            loss, parts = combine_terms(terms, cfg.loss_weights)
        if not math.isfinite(parts["total"]):
            raise NumericFailure(f"non-finite loss {parts['total']} at step {state.step + 1}")
        grads, norm = clip_grad_norm(backward(tape, loss, params), cfg.grad_clip)
        adamw_step(params, grads, state, lr, cfg.betas, cfg.eps, cfg.weight_decay)
        parts["grad_norm"] = norm
        return parts

    def _validate(self, params: ParamStore, val_set: Sequence[Scenario]) -> dict:
        if not val_set:
            return {}
        forecaster = V2XGraphForecaster(params, self.model_config, self.switches)
        result = evaluate(forecaster, val_set, self.eval_config)
        return {
            'val_min_ade': result.metrics.min_ade,
            'val_min_fde': result.metrics.min_fde,
            'val_miss_rate': result.metrics.miss_rate,
            'assoc_precision': result.association.precision,
            'assoc_recall': result.association.recall,
            'assoc_f1': result.association.f1,
        }

    def fit(self, train_set: Sequence[Scenario], val_set: Sequence[Scenario], labels: dict[str, ScenarioLabels],
            params: ParamStore | None = None) -> tuple[ParamStore, list[dict]]:
        cfg = self.train_config
        cfg.validate()
        params = params if params is not None else init_params(self.model_config)
        scenarios = take_fraction(list(train_set), cfg.fraction, cfg.seed)
        if not scenarios:
            raise DataError("training set is empty")
        positives = self._positives(scenarios, labels)
        steps_per_epoch = math.ceil(len(scenarios) / cfg.batch_size)
        total_steps = cfg.epochs * steps_per_epoch
        state = AdamState()
        self.log_event(
            f"Training on {len(scenarios)} scenarios (fraction {cfg.fraction}), {cfg.epochs} epochs x "
            f"{steps_per_epoch} steps, {params.num_parameters()} parameters"
        )
        if self.switches.names():
            self.log_event(f"Ablation switches: {', '.join(self.switches.names())}")

        history_logger = HistoryLogger(self.history_filename)
        try:
            for epoch in range(cfg.epochs):
                order = Rng(cfg.seed + epoch).permutation(len(scenarios))
                sums = {"dis": 0.0, "reg": 0.0, "cls": 0.0, "total": 0.0}
                lr = cfg.lr0
                for start in range(0, len(order), cfg.batch_size):
                    batch = sorted((scenarios[i] for i in order[start:start + cfg.batch_size]),
                                   key=lambda s: s.scenario_id)
                    lr = cosine_lr(cfg.lr0, state.step, total_steps)
                    try:
                        parts = self._train_step(batch, positives, params, state, lr)
                    except (NumericDomainError, NumericFailure) as exc:
                        self._save_last_good(params)
                        raise NumericFailure(f"training aborted in epoch {epoch}: {exc}") from exc
                    for name in sums:
                        sums[name] += parts[name]

                record = {
                    'epoch': epoch,
                    'steps': state.step,
                    'lr': lr,
                    'train_scenarios': len(scenarios),
                    'loss_dis': sums["dis"] / steps_per_epoch,
                    'loss_reg': sums["reg"] / steps_per_epoch,
                    'loss_cls': sums["cls"] / steps_per_epoch,
                    'loss_total': sums["total"] / steps_per_epoch,
                }
                record.update(self._validate(params, val_set))
                history_logger.log_epoch(record)
                self.history.append(record)
                self.log_event(
                    f"epoch {epoch}: loss {record['loss_total']:.4f} (dis {record['loss_dis']:.4f}, "
                    f"reg {record['loss_reg']:.4f}, cls {record['loss_cls']:.4f})"
                    + (f", val minADE {record['val_min_ade']:.3f}, assoc F1 {record['assoc_f1']:.3f}"
                       if 'val_min_ade' in record else "")
                )
        except KeyboardInterrupt:
            self._save_last_good(params)
            self.log_event(f"Training stopped by user after {state.step} steps.")
            raise
        finally:
            self._on_close(history_logger)

        if self.checkpoint_path:
            save_checkpoint(params, self.checkpoint_path)
            self.log_event(f"Checkpoint written to {self.checkpoint_path}")
        return params, self.history

    def _on_close(self, history_logger: HistoryLogger) -> None:
        history_logger.close()
