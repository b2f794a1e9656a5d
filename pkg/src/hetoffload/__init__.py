"""Joint task offloading, clock selection and subchannel allocation for two-tier HetNets."""

__version__ = "0.1.0"
