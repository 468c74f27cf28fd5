"""Deterministic stand-in for remote service providers.

Each invocation answers from the service's catalog dataset and is charged the
client call cost of its realized sizes, scaled by ``1 + u`` with ``u`` drawn
uniformly from ``[-jitter, +jitter]``.

Random stream: numpy ``PCG64`` seeded from ``SeedSequence(seed,
spawn_key=(crc32(service_id), invocation_index))``, where the index counts
invocations of that service since the last reset. One uniform draw per
invocation, and none when jitter is zero.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from wsms.catalog import Catalog
from wsms.costmodel import CallMetrics, client_call_cost
from wsms.errors import FabricError, WsmsError
from wsms.relation import Predicate, Value

ENVELOPE_BYTES = 64


@dataclass(frozen=True)
class Invocation:
    rows: tuple[tuple[Value, ...], ...]
    schema: tuple[str, ...]
    metrics: CallMetrics
    time: float


@dataclass(frozen=True)
class TraceEntry:
    invocation: int
    service: str
    callsize: float
    resultsize: float
    time: float


class SimFabric:
    def __init__(self, catalog: Catalog, seed: int = 0, jitter: float = 0.0):
        if not 0.0 <= jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")
        self.catalog = catalog
        self.jitter = jitter
        self.reset(seed)

    def reset(self, seed: int | None = None) -> SimFabric:
        if seed is not None:
            self.seed = seed
        self._counts: dict[str, int] = {}
        self._trace: list[TraceEntry] = []
        return self

    def _noise(self, service_id: str, index: int) -> float:
        if self.jitter == 0.0:
            return 0.0
        ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(service_id.encode()), index))
        return float(np.random.Generator(np.random.PCG64(ss)).uniform(-self.jitter, self.jitter))

    def invoke(
        self,
        service_id: str,
        binding: Mapping[str, Value],
        predicates: Iterable[Predicate] = (),
        returns: Sequence[str] | None = None,
    ) -> Invocation:
        """Answer one call.

        Rows are the dataset rows agreeing with ``binding`` on the service's
        inputs and satisfying every pushed predicate, projected onto the inputs
        followed by ``returns`` (all outputs when None).
        """
        try:
            ws = self.catalog.service(service_id)
        except WsmsError:
            raise FabricError(f"unknown service {service_id!r}") from None
        missing = [a for a in ws.input_attrs if a not in binding]
        if missing:
            raise FabricError(f"{service_id}: binding lacks input attribute(s) {missing}")
        returned = ws.output_attrs if returns is None else tuple(returns)
        unknown = [a for a in returned if a not in ws.output_attrs]
        if unknown:
            raise FabricError(f"{service_id}: cannot return non-output attribute(s) {unknown}")
        predicates = tuple(predicates)

        data = ws.dataset
        try:
            in_idx = [data.index(a) for a in ws.input_attrs]
            out_idx = [data.index(a) for a in ws.input_attrs + returned]
        except WsmsError as e:
            raise FabricError(f"{service_id}: {e}") from None
        key = tuple(binding[a] for a in ws.input_attrs)
        rows = []
        try:
            for row in data.rows:
                if tuple(row[i] for i in in_idx) != key:
                    continue
                if predicates:
                    named = dict(zip(data.schema, row))
                    if not all(p.evaluate(named) for p in predicates):
                        continue
                rows.append(tuple(row[i] for i in out_idx))
        except KeyError as e:
            raise FabricError(f"{service_id}: predicate references unknown attribute {e}") from None

        metrics = CallMetrics(
            callsize=self.catalog.row_width(ws.input_attrs) + ENVELOPE_BYTES,
            resultsize=len(rows) * self.catalog.row_width(returned),
        )
        index = self._counts.get(service_id, 0)
        self._counts[service_id] = index + 1
        time = client_call_cost(ws.profile, metrics) * (1.0 + self._noise(service_id, index))
        self._trace.append(TraceEntry(len(self._trace), service_id, metrics.callsize, metrics.resultsize, time))
        return Invocation(tuple(rows), ws.input_attrs + returned, metrics, time)

    def trace(self) -> tuple[TraceEntry, ...]:
        return tuple(self._trace)


def trace_csv(entries: Iterable[TraceEntry]) -> str:
    lines = ["invocation,service,callsize,resultsize,time"]
    for e in entries:
        lines.append(f"{e.invocation},{e.service},{e.callsize:g},{e.resultsize:g},{e.time:.6f}")
    return "\n".join(lines) + "\n"
