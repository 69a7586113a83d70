"""Per-node byte accounting for block transfers.

Volume only, no bandwidth or contention: each remote block read adds its
payload size to the producer's outbound and the consumer's inbound
counters, broken down by iteration and phase (shuffle = gradient slices,
broadcast = weight slices).
"""

from __future__ import annotations

import threading
from collections import Counter


class NetworkStats:
    def __init__(self):
        self._lock = threading.Lock()
        self._inbound: Counter = Counter()  # node -> bytes
        self._outbound: Counter = Counter()
        # (iteration, phase, node) -> bytes
        self._inbound_detail: Counter = Counter()
        self._outbound_detail: Counter = Counter()

    def record_transfer(
        self, producer: int, consumer: int, nbytes: int, phase: str, iteration: int
    ) -> None:
        with self._lock:
            self._outbound[producer] += nbytes
            self._inbound[consumer] += nbytes
            self._outbound_detail[(iteration, phase, producer)] += nbytes
            self._inbound_detail[(iteration, phase, consumer)] += nbytes

    def inbound_bytes(self, node: int) -> int:
        with self._lock:
            return self._inbound[node]

    def outbound_bytes(self, node: int) -> int:
        with self._lock:
            return self._outbound[node]

    def total_inbound(self) -> int:
        with self._lock:
            return sum(self._inbound.values())

    def total_outbound(self) -> int:
        with self._lock:
            return sum(self._outbound.values())

    def node_phase_bytes(self, node: int, iteration: int | None = None, phase: str | None = None) -> tuple[int, int]:
        """(inbound, outbound) for a node, filtered by iteration and phase."""

        def matches(key) -> bool:
            it, ph, nd = key
            return (
                nd == node
                and (iteration is None or it == iteration)
                and (phase is None or ph == phase)
            )

        with self._lock:
            inbound = sum(v for k, v in self._inbound_detail.items() if matches(k))
            outbound = sum(v for k, v in self._outbound_detail.items() if matches(k))
        return inbound, outbound

    def rows(self) -> list[dict]:
        """Long-format rows (iteration, phase, node, inbound, outbound)."""
        with self._lock:
            keys = sorted(set(self._inbound_detail) | set(self._outbound_detail))
            return [
                {
                    "iteration": it,
                    "phase": ph,
                    "node": nd,
                    "inbound_bytes": self._inbound_detail[(it, ph, nd)],
                    "outbound_bytes": self._outbound_detail[(it, ph, nd)],
                }
                for (it, ph, nd) in keys
            ]
