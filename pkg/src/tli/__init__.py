"""Workbench for mode-sequenced dynamical-system motion policies.

Learn per-mode stable policies from demonstrations, synthesize a reactive
mode automaton from a temporal-logic task description, estimate mode
boundaries online from invariance failures, and modulate velocities so the
closed loop keeps satisfying the task under finite perturbations.
"""

__version__ = "0.1.0"
