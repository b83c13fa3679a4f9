"""CORAL: a communicative world model (information agent) paired with a PPO
control agent, trained on procedurally generated partially observable
grid-worlds.

Subpackages
-----------
envs      procedural grid-world tasks, vectorized stepping
tensor    minimal reverse-mode autodiff on numpy, Adam, checkpoints
agents    information agent (transformer / GRU), control agent, WM baseline
training  rollouts, GAE, PPO + composite IA loss, run modes
analysis  confidence intervals, Welch tests, time-to-threshold, ICE curves
"""

__version__ = "0.1.0"
