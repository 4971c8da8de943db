"""Budget-preserving reallocation search for detection backbones."""

__version__ = "0.1.0"

from .arch import (
    Architecture,
    BackboneFamily,
    builtin_families,
    format_codes,
    get_family,
    parse_codes,
    validate_architecture,
)
from .budget import BudgetModel, backbone_cost, is_within_budget, weighted_block_count
from .space import AllocationSpace, count_allocations, enumerate_allocations, operation_space_size
from .search import (
    SearchConfig,
    SearchReport,
    brute_force_search,
    greedy_op_search,
    hierarchical_search,
    stage_search,
)

__all__ = [
    "AllocationSpace", "Architecture", "BackboneFamily", "BudgetModel", "SearchConfig",
    "SearchReport", "backbone_cost", "brute_force_search", "builtin_families",
    "count_allocations", "enumerate_allocations", "format_codes", "get_family",
    "greedy_op_search", "hierarchical_search", "is_within_budget", "operation_space_size",
    "parse_codes", "stage_search", "validate_architecture", "weighted_block_count",
]
