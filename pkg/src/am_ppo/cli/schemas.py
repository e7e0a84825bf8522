"""Pydantic schemas for run configuration and command results."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from am_ppo.core.modulation import ModulationConfig
from am_ppo.core.update import UpdateConfig

# Defaults chosen here rather than taken from the published hyperparameter tables.
LOCAL_DEFAULTS = {
    "env_id": "point-mass task stands in for the MuJoCo suite",
    "seed": "arbitrary",
    "hidden_sizes": "no published architecture",
    "learning_rate": "no published value; common continuous-control default",
    "norm_adv": "left open by the published setup",
    "total_timesteps": "desk profile (published: 1000000)",
    "num_steps": "desk profile (published: 2048)",
    "num_minibatches": "desk profile (published: 32)",
    "out_dir": "local path",
}


class RunConfig(UpdateConfig, ModulationConfig):
    """Every knob of one training run as flat keys.

    Inherits the update and modulation fields so a config file mirrors field names
    one to one.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    env_id: Literal["pointmass1d", "pointmass2d"] = "pointmass1d"
    seed: int = 1
    total_timesteps: int = Field(default=100_000, ge=1)
    num_steps: int = Field(default=1024, ge=1)
    num_envs: int = Field(default=1, ge=1)
    gamma: float = Field(default=0.99, ge=0.0, le=1.0)
    gae_lambda: float = Field(default=0.95, ge=0.0, le=1.0)
    num_minibatches: int = Field(default=8, ge=1)
    hidden_sizes: tuple[int, ...] = (64, 64)
    out_dir: str = "runs/default"

    @model_validator(mode="after")
    def _check_batch_layout(self) -> "RunConfig":
        if self.batch_size % self.num_minibatches != 0:
            raise ValueError(
                f"num_minibatches={self.num_minibatches} must divide the batch size "
                f"num_steps*num_envs={self.batch_size}"
            )
        if self.total_timesteps < self.batch_size:
            raise ValueError(
                f"total_timesteps={self.total_timesteps} is smaller than one "
                f"iteration ({self.batch_size} steps)"
            )
        if any(width < 1 for width in self.hidden_sizes):
            raise ValueError("hidden_sizes entries must be positive")
        return self

    @property
    def batch_size(self) -> int:
        return self.num_steps * self.num_envs

    @property
    def num_iterations(self) -> int:
        return self.total_timesteps // self.batch_size

    def update_config(self) -> UpdateConfig:
        return UpdateConfig.model_validate(
            self.model_dump(include=set(UpdateConfig.model_fields))
        )

    def modulation_config(self) -> ModulationConfig:
        return ModulationConfig.model_validate(
            self.model_dump(include=set(ModulationConfig.model_fields))
        )


class EvalSummary(BaseModel):
    """Result of evaluating the deterministic policy of a checkpoint."""

    env_id: str = Field(..., description="Environment evaluated")
    algo: str = Field(..., description="Algorithm the checkpoint was trained with")
    iteration: int = Field(..., description="Training iteration of the checkpoint")
    episodes: int = Field(..., ge=1, description="Number of evaluation episodes")
    seed: int = Field(..., description="Seed the reset seeds were derived from")
    mean_return: float = Field(..., description="Mean episodic return")
    std_return: float = Field(..., description="Population std of episodic returns")
    returns: list[float] = Field(..., description="Per-episode returns")
