"""kitchenrl: object-attentive RL agent on a deterministic toy kitchen."""

__version__ = "0.1.0"
