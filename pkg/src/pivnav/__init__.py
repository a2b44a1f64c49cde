"""Zero-shot imitation for goal-driven visual navigation across camera perspectives.

Pipeline pieces: a raycast gridworld with multi-perspective rendering, a
feature-disentanglement network trained with a cycle reconstruction loss, an
inverse dynamics model for action labeling, and a model-based imitation
learner that plans by gradient descent in feature space and executes MPC-style.
"""

__version__ = "0.1.0"
