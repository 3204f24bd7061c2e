"""Cache vs buffer placement in two-tier HetNets."""
