"""
Environment factory for cramerlab.

Maps environment names to constructors so configs and the CLI can ask
for an environment by name.
"""

from typing import Any, Union

from loguru import logger

from cramerlab.envs.classic_control import Acrobot, CartPole, ClassicControlEnv
from cramerlab.envs.finite_mdp import FiniteMDP, chain3, gridworld, random_finite_mdp

ENV_NAMES = ("chain3", "gridworld12", "cartpole", "acrobot", "random_finite")


def make_env(name: str, **params: Any) -> Union[FiniteMDP, ClassicControlEnv]:
    """
    Create an environment by name.

    Args:
        name: One of:
            - "chain3": 3-state chain, gamma 0.9
            - "gridworld12": 12x12 gridworld, gamma 0.99
            - "cartpole": CartPole, 200-step cap
            - "acrobot": Acrobot, 500-step cap
            - "random_finite": seeded random MDP (n_states, n_actions,
              n_reward_atoms, seed, ...)
        **params: Constructor overrides such as gamma or max_steps

    Returns:
        A fresh environment instance

    Raises:
        ValueError: If name is unknown or params are invalid
    """
    key = name.lower()
    logger.debug(f"Creating environment '{key}' with {params}")

    try:
        if key == "chain3":
            return chain3(**params)
        if key in ("gridworld12", "gridworld"):
            return gridworld(**params)
        if key == "cartpole":
            return CartPole(**params)
        if key == "acrobot":
            return Acrobot(**params)
        if key == "random_finite":
            return random_finite_mdp(**params)
    except TypeError as e:
        raise ValueError(f"invalid parameters for environment '{name}': {e}") from e

    raise ValueError(f"Unknown environment: {name}. Valid options: {', '.join(ENV_NAMES)}")
