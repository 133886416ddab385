"""Hierarchical optimization and control of a combined steam/electricity
generation unit: nonlinear fire-tube boiler model, hybrid high-level
scheduling (timed automata compiled to MLD/MILP), tracking and startup MPC,
EKF state estimation, and parameter identification."""

__version__ = "0.1.0"
