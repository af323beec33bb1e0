"""Virtual-energy-storage scheduling with finite-sample reliability certificates."""

__version__ = "0.1.0"
