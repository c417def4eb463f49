"""2D AUV docking benchmark: dynamics, shaped reward, TD3/SAC/PPO, harness."""

__version__ = "0.1.0"
