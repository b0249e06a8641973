"""Staking-derivative risk simulator.

Core pricing curves and calibration live in :mod:`stakesim.core`, the
slashing urn and its analytic oracles in :mod:`stakesim.urn`, the
agent-based engines in :mod:`stakesim.sim2` / :mod:`stakesim.sim3`, the
mean-variance machinery in :mod:`stakesim.portfolio`, and sweeps plus CSV
emission in :mod:`stakesim.harness`.
"""

__version__ = "0.1.0"
