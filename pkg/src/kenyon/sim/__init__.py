from .reservoir import build_reservoir, run_episode, spectral_radius, step

__all__ = ["build_reservoir", "run_episode", "spectral_radius", "step"]
