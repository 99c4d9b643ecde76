import re
from dataclasses import replace
from typing import Sequence

from coop_forecaster.Association.pseudo_labels import ScenarioLabels
from coop_forecaster.config import RunConfig
from coop_forecaster.Evaluation.harness import COOPERATION_SETTINGS, EvaluationResult, evaluate
from coop_forecaster.Model.network import NO_ABLATION, AblationSwitches, V2XGraphForecaster
from coop_forecaster.Numerics.params import ParamStore
from coop_forecaster.Scenario.dataset import mask_views
from coop_forecaster.Scenario.types import Scenario
from coop_forecaster.Training.trainer import Trainer
from coop_forecaster.Utils.errors import ConfigError

EVAL_TIME_SWITCHES = ("mask_coop_in_mfg", "mask_coop_in_alg", "mask_coop_in_cig", "fully_connected_A")
DISTURB_PATTERN = re.compile(r"^disturb_labels\(([0-9.eE+-]+)\)$")


def parse_switch(text: str) -> tuple[AblationSwitches, float]:
    """`no_mfg`, `mask_coop_in_cig+no_alg`, `disturb_labels(0.25)`, ... -> (switches, label disturbance)."""
    switches, disturbance = [], 0.0
    for part in filter(None, (p.strip() for p in text.split("+"))):
        match = DISTURB_PATTERN.match(part)
        if match:
            try:
                disturbance = float(match.group(1))
            except ValueError:
                raise ConfigError(f"ablate: bad disturbance probability in {part!r}") from None
            if not 0.0 <= disturbance <= 1.0:
                raise ConfigError(f"ablate: disturbance probability must lie in [0, 1], got {disturbance}")
        else:
            switches.append(part)
    return AblationSwitches.from_names(switches), disturbance


def needs_retraining(switches: AblationSwitches, disturbance: float) -> bool:
    return disturbance > 0.0 or any(name not in EVAL_TIME_SWITCHES for name in switches.names())


def ablate(switch: str, config: RunConfig, output_folder: str, val_set: Sequence[Scenario],
           params: ParamStore | None = None, train_set: Sequence[Scenario] = (),
           labels: dict[str, ScenarioLabels] | None = None) -> tuple[EvaluationResult, ParamStore]:
    """
    Evaluate one ablation setting.

    Masking switches and fully_connected_A act at evaluation time on the given
    parameters; component removal and label disturbance retrain from scratch.
    """
    switches, disturbance = parse_switch(switch)
    if needs_retraining(switches, disturbance) or params is None:
        if not train_set or labels is None:
            raise ConfigError(f"ablate: {switch!r} retrains and needs training data with labels")
        trainer = Trainer(output_folder, config.model, replace(config.train, label_disturbance=disturbance),
                          config.eval, switches)
        params, _ = trainer.fit(train_set, val_set, labels)
    forecaster = V2XGraphForecaster(params, config.model, switches)
    return evaluate(forecaster, val_set, config.eval), params


def scalability_sweep(config: RunConfig, output_folder: str, train_set: Sequence[Scenario],
                      val_set: Sequence[Scenario], labels: dict[str, ScenarioLabels],
                      fractions: Sequence[float] = (0.25, 0.5, 1.0)) -> list[tuple[str, float, EvaluationResult]]:
    """Train at each dataset fraction, vehicle-only and fully cooperative, scored on one validation set."""
    results = []
    for setting in ("vehicle-only", "V2V&I"):
        kinds = COOPERATION_SETTINGS[setting]
        train = [mask_views(s, kinds) for s in train_set]
        eval_config = replace(config.eval, mask_views=kinds)
        for fraction in fractions:
            trainer = Trainer(output_folder, config.model, replace(config.train, fraction=fraction), eval_config,
                              NO_ABLATION)
            params, _ = trainer.fit(train, val_set, labels)
            forecaster = V2XGraphForecaster(params, config.model)
            results.append((setting, fraction, evaluate(forecaster, val_set, eval_config)))
    return results
