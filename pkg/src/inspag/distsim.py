"""Deterministic simulated parameter-server rounds over a partitioned dataset.

Workers never share mutable state; a round is one broadcast of the query
point plus one reduce of the per-worker results, folded in ascending
worker id so repeated runs are byte-identical.  The ledger charges
m * d * 8 bytes in each direction per round (the broadcast payload size),
which is the unit the round-complexity claims are stated in.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, WorkerFailure


@dataclass
class CommLedger:
    rounds: int = 0
    bytes_up: int = 0
    bytes_down: int = 0
    per_round: list = field(default_factory=list)

    def charge(self, m, d):
        payload = m * d * 8
        self.rounds += 1
        self.bytes_down += payload
        self.bytes_up += payload
        self.per_round.append((self.rounds, 2 * payload))

    @property
    def total_bytes(self):
        return self.bytes_up + self.bytes_down


class WorkerPool:
    """m disjoint row-index blocks of a seed-shuffled dataset."""

    def __init__(self, data, partitions, seed):
        self.data = data
        self.partitions = partitions
        self.seed = seed
        self.m = len(partitions)

    def shard(self, j):
        return self.partitions[j]


def partition(data, m, seed):
    """Shuffle rows with the given seed, then split into m near-equal blocks.

    Block sizes differ by at most one; the same seed reproduces the same
    partition exactly.
    """
    if m < 1:
        raise InputError("m must be at least 1")
    if m > data.N:
        raise InputError(f"cannot split {data.N} rows across {m} workers")
    perm = np.random.default_rng(seed).permutation(data.N)
    blocks = np.array_split(perm, m)
    return WorkerPool(data, blocks, seed)


def broadcast_reduce(pool, point, map_fn, ledger=None):
    """One communication round: send `point`, average worker results.

    map_fn(worker_id, row_indices, point) -> ndarray.  Results are folded
    in ascending worker id.  A raising worker aborts the round with its id.
    Returns the average; the ledger (if given) is charged one round.
    """
    point = np.asarray(point, dtype=np.float64)
    acc = None
    for j in range(pool.m):
        try:
            r = np.asarray(map_fn(j, pool.partitions[j], point),
                           dtype=np.float64)
        except Exception as exc:  # noqa: BLE001 - simulation boundary
            raise WorkerFailure(j, exc) from exc
        acc = r if acc is None else acc + r
    if ledger is not None:
        ledger.charge(pool.m, point.size)
    return acc / pool.m
