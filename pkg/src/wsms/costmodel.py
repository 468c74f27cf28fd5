"""Service-call cost model, plan cost estimation and response-time profiling.

A service call is charged on both ends of the wire. The provider side is::

    scost = initiate_server + callsize*unpacking + serviceexec
            + resultsize*packing + (resultsize + packetize)*sending

and the client observes::

    cost = initiate_client + callsize*packing + (callsize + packetize)*sending
           + scost + resultsize*unpacking

Times are abstract milliseconds, sizes are bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

if TYPE_CHECKING:
    from wsms.catalog import ServiceSpec


@dataclass(frozen=True)
class ServiceProfile:
    initiate_client: float = 0.0
    initiate_server: float = 0.0
    packing: float = 0.0
    unpacking: float = 0.0
    packetize: float = 0.0
    sending: float = 0.0
    serviceexec: float = 0.0

    def problems(self) -> list[str]:
        """Names of fields that are negative or not finite."""
        bad = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
                bad.append(f.name)
        return bad

    def scaled(self, factor: float) -> ServiceProfile:
        """Every time rate multiplied by ``factor``; ``packetize`` is a byte count and stays."""
        return ServiceProfile(**{
            f.name: getattr(self, f.name) * (1.0 if f.name == "packetize" else factor) for f in fields(self)
        })


@dataclass(frozen=True)
class CallMetrics:
    callsize: float = 0.0
    resultsize: float = 0.0


def server_call_cost(p: ServiceProfile, m: CallMetrics) -> float:
    return (
        p.initiate_server
        + m.callsize * p.unpacking
        + p.serviceexec
        + m.resultsize * p.packing
        + (m.resultsize + p.packetize) * p.sending
    )


def client_call_cost(p: ServiceProfile, m: CallMetrics) -> float:
    return (
        p.initiate_client
        + m.callsize * p.packing
        + (m.callsize + p.packetize) * p.sending
        + server_call_cost(p, m)
        + m.resultsize * p.unpacking
    )


def per_tuple_cost(ws: ServiceSpec, resultsize: float | None = None) -> float:
    """Declared cost of invoking ``ws`` once, optionally with a reduced result size."""
    size = ws.avg_resultsize if resultsize is None else resultsize
    return client_call_cost(ws.profile, CallMetrics(ws.avg_callsize, size))


def realized_cost(calls: Iterable[tuple[ServiceProfile, CallMetrics]]) -> float:
    """Sum of client call costs for calls whose sizes were observed at run time."""
    total = 0.0
    for profile, metrics in calls:
        total += client_call_cost(profile, metrics)
    return total


@dataclass(frozen=True)
class ServiceStats:
    count: int = 0
    time_sum: float = 0.0
    resultsize_sum: float = 0.0

    @property
    def mean_time(self) -> float:
        if not self.count:
            raise ValueError("no observations")
        return self.time_sum / self.count

    @property
    def mean_resultsize(self) -> float:
        if not self.count:
            raise ValueError("no observations")
        return self.resultsize_sum / self.count


@dataclass(frozen=True)
class ProfilerStats:
    """Per-service response-time observations. Treat as immutable."""

    services: Mapping[str, ServiceStats] = field(default_factory=dict)

    def get(self, service_id: str) -> ServiceStats:
        return self.services.get(service_id, ServiceStats())


def record_observation(
    stats: ProfilerStats, service_id: str, total_time: float, resultsize: float
) -> ProfilerStats:
    if total_time < 0 or resultsize < 0:
        raise ValueError("observations must be nonnegative")
    # means are derived from exact running sums, so they never drift from sum/count
    old = stats.get(service_id)
    new = ServiceStats(old.count + 1, old.time_sum + total_time, old.resultsize_sum + resultsize)
    services = dict(stats.services)
    services[service_id] = new
    return ProfilerStats(services)


@dataclass(frozen=True)
class CostModel:
    """Prices a single invocation of a service.

    Declared profiles are used unless ``use_profiled`` is set, in which case a
    service with observations is priced at its observed mean call time.
    """

    stats: ProfilerStats = field(default_factory=ProfilerStats)
    use_profiled: bool = False

    def call_cost(self, ws: ServiceSpec, resultsize: float | None = None) -> float:
        if self.use_profiled:
            observed = self.stats.get(ws.id)
            if observed.count:
                return observed.mean_time
        return per_tuple_cost(ws, resultsize)


DEFAULT_COST_MODEL = CostModel()


@dataclass(frozen=True)
class CallStep:
    """One service invocation position in a plan, with everything pushed onto it."""

    service: ServiceSpec
    factors: tuple[float, ...] = ()
    resultsize: float | None = None

    @property
    def sigma_eff(self) -> float:
        s = self.service.selectivity
        for f in self.factors:
            s *= f
        return s

    def cost(self, cm: CostModel = DEFAULT_COST_MODEL) -> float:
        return cm.call_cost(self.service, self.resultsize)


@dataclass(frozen=True)
class ServiceCost:
    service_id: str
    input_cardinality: float
    per_call: float
    subtotal: float


@dataclass(frozen=True)
class CostEstimate:
    total: float
    per_service: tuple[ServiceCost, ...] = ()

    def lines(self) -> list[str]:
        out = [f"estimate={self.total:.6f}"]
        for sc in self.per_service:
            out.append(
                f"  {sc.service_id} calls={sc.input_cardinality:.6f} "
                f"per_call={sc.per_call:.6f} subtotal={sc.subtotal:.6f}"
            )
        return out


def estimate_plan_cost(
    order: Sequence[CallStep | ServiceSpec],
    cm: CostModel = DEFAULT_COST_MODEL,
    seed_cardinality: float = 1.0,
) -> CostEstimate:
    """Expected cost of invoking services tuple-at-a-time in ``order``.

    The k-th service is called once per tuple reaching it; the tuple count
    starts at ``seed_cardinality`` and is multiplied by each service's
    effective selectivity.
    """
    n = seed_cardinality
    total = 0.0
    rows = []
    for item in order:
        step = item if isinstance(item, CallStep) else CallStep(item)
        c = step.cost(cm)
        sub = n * c
        rows.append(ServiceCost(step.service.id, n, c, sub))
        total += sub
        n *= step.sigma_eff
    return CostEstimate(total, tuple(rows))
