"""Exact MILP placement: model builder, primal simplex, branch-and-bound."""
