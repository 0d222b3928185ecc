"""Estimator-style front end for the repair learner.

``RepairAgent`` follows scikit-learn conventions so it slots into that
ecosystem without depending on it: hyperparameters are constructor arguments
stored verbatim, ``get_params``/``set_params`` expose them for cloning and
search, ``fit`` returns ``self``, and fitted state lives in
trailing-underscore attributes.

    agent = RepairAgent(goal="tardiness_improvement", episodes=300, random_state=7)
    agent.fit("desk")
    repaired = agent.predict([scenario])[0]
"""

from __future__ import annotations

from .episodes import (
    EpisodeResult,
    RepairGoal,
    Scenario,
    TrainingCurve,
    repair,
    train,
)
from .learning import LearnerConfig, RuleTable
from .model import Schedule, compute_metrics, ensure_valid
from .plant import PlantConfig, preset


class NotFittedError(ValueError, AttributeError):
    """predict/score called before fit."""


class RepairAgent:
    """Learns a schedule-repair policy from simulated disruption episodes.

    ``fit`` takes a plant configuration (or preset name) and trains the rule
    table on seeded new-order disruptions; ``predict`` greedily repairs
    disrupted scenarios with the frozen policy.
    """

    _PARAMS = (
        "goal", "episodes", "alpha", "gamma", "lambda_", "epsilon",
        "n_buckets", "k_focal", "k_aux", "max_steps", "random_state",
    )

    def __init__(self, goal: str = "tardiness_improvement", episodes: int = 300,
                 alpha: float = 0.1, gamma: float = 0.9, lambda_: float = 0.1,
                 epsilon: float = 0.1, n_buckets: int = 5, k_focal: int = 5,
                 k_aux: int = 3, max_steps: int = 200, random_state: int = 0):
        self.goal = goal
        self.episodes = episodes
        self.alpha = alpha
        self.gamma = gamma
        self.lambda_ = lambda_
        self.epsilon = epsilon
        self.n_buckets = n_buckets
        self.k_focal = k_focal
        self.k_aux = k_aux
        self.max_steps = max_steps
        self.random_state = random_state

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._PARAMS}

    def set_params(self, **params) -> "RepairAgent":
        for name, value in params.items():
            if name not in self._PARAMS:
                raise ValueError(f"invalid parameter {name!r} for RepairAgent")
            setattr(self, name, value)
        return self

    def _learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            alpha=self.alpha, gamma=self.gamma, lambda_=self.lambda_,
            epsilon=self.epsilon, n_buckets=self.n_buckets,
        ).validated()

    def fit(self, X: PlantConfig | str, y=None) -> "RepairAgent":
        """Train on simulated disruptions of the given plant (or preset name)."""
        plant_config = preset(X) if isinstance(X, str) else X
        goal = RepairGoal.named(self.goal)
        table, curve = train(
            plant_config, goal, self.episodes,
            learner_config=self._learner_config(), max_steps=self.max_steps,
            seed=self.random_state, k_focal=self.k_focal, k_aux=self.k_aux,
        )
        self.rules_: RuleTable = table
        self.curve_: TrainingCurve = curve
        self.n_rules_: int = table.created_count
        self.plant_config_: PlantConfig = plant_config
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "rules_"):
            raise NotFittedError("RepairAgent is not fitted; call fit() first")

    def repair_scenario(self, scenario: Scenario) -> EpisodeResult:
        """Greedy repair of one disrupted scenario with the frozen policy.

        The goal additionally caps tardiness at the pre-disruption level, so
        repair keeps going until the disruption is fully absorbed (or the
        step budget runs out).
        """
        self._check_fitted()
        ensure_valid(scenario.disrupted)
        baseline_tard = compute_metrics(scenario.baseline).total_tardiness
        goal = RepairGoal.named(self.goal, abs_tard_limit=baseline_tard)
        return repair(
            scenario.disrupted, scenario.baseline, goal, self.rules_,
            max_steps=self.max_steps, config=self._learner_config(),
            k_focal=self.k_focal, k_aux=self.k_aux,
        )

    def predict(self, X: list[Scenario]) -> list[Schedule]:
        """Repaired schedules for a batch of disrupted scenarios."""
        return [self.repair_scenario(s).final_schedule for s in X]

    def score(self, X: list[Scenario], y=None) -> float:
        """Mean fractional tardiness reduction relative to post-insertion."""
        self._check_fitted()
        reductions = []
        for scenario in X:
            post = scenario.metrics.total_tardiness
            result = self.repair_scenario(scenario)
            final = result.final_metrics.total_tardiness
            reductions.append((post - final) / post if post > 0 else 0.0)
        return sum(reductions) / len(reductions) if reductions else 0.0
