"""Query planning and execution over a catalog of simulated web services."""

from wsms.catalog import Catalog, ServiceSpec, bundled_catalog_text, compose, load_catalog, validate_catalog
from wsms.costmodel import CallMetrics, CostModel, ServiceProfile, client_call_cost, server_call_cost
from wsms.errors import WsmsError
from wsms.executor import execute_plan, reference_execute
from wsms.planner import STRATEGIES, ExecutionPlan, optimize, plan_query
from wsms.relation import Relation
from wsms.simfabric import SimFabric
from wsms.sqlfront import parse_query, validate_query

__all__ = [
    "Catalog", "ServiceSpec", "bundled_catalog_text", "compose", "load_catalog", "validate_catalog",
    "CallMetrics", "CostModel", "ServiceProfile", "client_call_cost", "server_call_cost",
    "WsmsError", "execute_plan", "reference_execute",
    "STRATEGIES", "ExecutionPlan", "optimize", "plan_query",
    "Relation", "SimFabric", "parse_query", "validate_query",
]
