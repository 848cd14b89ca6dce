"""Q-tensor relaxation, defect extraction and limit-energy tools for nematic
colloids in the strong-field, small-core regime."""

__version__ = "0.1.0"
