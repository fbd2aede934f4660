"""Built-in verifiable environments."""

from __future__ import annotations

from .base import Env
from .cartpole import CartPoleState, CartPoleSwingup
from .pointmass import PointMassState, PointMassVelocity, min_feasible_constant_force_cost
from .tabular import (
    CmdpSolution,
    TabularCmdp,
    TabularCmdpEnv,
    load_cmdp,
    random_cmdp,
    save_cmdp,
    solve_cmdp_exact,
)

__all__ = [
    "Env",
    "CartPoleState",
    "CartPoleSwingup",
    "PointMassState",
    "PointMassVelocity",
    "min_feasible_constant_force_cost",
    "CmdpSolution",
    "TabularCmdp",
    "TabularCmdpEnv",
    "load_cmdp",
    "random_cmdp",
    "save_cmdp",
    "solve_cmdp_exact",
    "make_env",
]


def make_env(name: str, **kwargs) -> Env:
    """Instantiate a built-in environment by config key."""
    if name == "cartpole":
        return CartPoleSwingup(**kwargs)
    if name == "pointmass":
        return PointMassVelocity(**kwargs)
    if name == "tabular":
        path = kwargs.pop("table_file", None)
        if path is None:
            raise ValueError("tabular env needs table_file=<path>")
        return TabularCmdpEnv(load_cmdp(path), **kwargs)
    raise ValueError(f"unknown environment {name!r}")
