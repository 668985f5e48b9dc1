from .base import TrainerConfig, TrainResult, evaluate
from .gradient import train_gd_theta, train_gd_w
from .metropolis import train_composed, train_metropolis

# ordem fixa: o índice de cada algoritmo entra na derivação das sementes
ALGORITHMS = ("gd_w", "gd_theta", "metropolis", "composed")

TRAINERS = {
    "gd_w": train_gd_w,
    "gd_theta": train_gd_theta,
    "metropolis": train_metropolis,
    "composed": train_composed,
}

__all__ = ["ALGORITHMS", "TRAINERS", "TrainerConfig", "TrainResult", "evaluate"]
