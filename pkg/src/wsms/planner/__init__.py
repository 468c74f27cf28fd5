"""Logical planning, call ordering and rewrite rules."""

from wsms.planner.nodes import (
    Attached,
    Join,
    LogicalPlan,
    Project,
    Select,
    ServiceCall,
    call_steps,
    check_executable,
    invocation_order,
    plan_estimate,
    serialize,
    to_dot,
)
from wsms.planner.ordering import BRUTE_FORCE_LIMIT, brute_force_optimal, greedy_order, linear_extensions
from wsms.planner.pipeline import (
    STRATEGIES,
    ExecutionPlan,
    build_initial_plan,
    linearize,
    optimize,
    optimize_subtrees,
    plan_query,
    push_projections,
    push_selections,
    reorder,
)
from wsms.planner.rules import RULES

__all__ = [
    "Attached", "Join", "LogicalPlan", "Project", "Select", "ServiceCall",
    "call_steps", "check_executable", "invocation_order", "plan_estimate", "serialize", "to_dot",
    "BRUTE_FORCE_LIMIT", "brute_force_optimal", "greedy_order", "linear_extensions",
    "STRATEGIES", "ExecutionPlan", "build_initial_plan", "linearize", "optimize",
    "optimize_subtrees", "plan_query", "push_projections", "push_selections", "reorder",
    "RULES",
]
