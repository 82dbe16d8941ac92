"""Built-in simulators and the random-controller data collector."""

from .base import Environment, OracleModel, StepResult, collect
from .classic import (CartPole, CartPoleParams, MountainCar, MountainCarParams,
                      cartpole_dynamics, mountain_car_dynamics)
from .highway import (AccParams, AdaptiveCruiseControl, Parking, ParkingParams,
                      parking_dynamics)

REGISTRY: dict[str, type[Environment]] = {
    cls.id: cls for cls in (CartPole, MountainCar, AdaptiveCruiseControl, Parking)
}


def make_env(env_id: str, **constants) -> Environment:
    try:
        cls = REGISTRY[env_id]
    except KeyError:
        raise KeyError(f"unknown environment {env_id!r}; "
                       f"choose from {', '.join(sorted(REGISTRY))}") from None
    return cls(**constants)


__all__ = [
    "Environment", "OracleModel", "StepResult", "collect", "CartPole",
    "CartPoleParams", "MountainCar", "MountainCarParams", "AdaptiveCruiseControl",
    "AccParams", "Parking", "ParkingParams", "cartpole_dynamics",
    "mountain_car_dynamics", "parking_dynamics", "REGISTRY", "make_env",
]
