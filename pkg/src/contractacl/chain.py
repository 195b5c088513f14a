"""Hash-chained blocks, proof-of-work mining and validation by re-execution.

A :class:`NodeState` is one replica: its local chain, the world state
obtained by executing that chain from genesis, and a mempool.  Blocks move
between replicas as immutable values; a replica only appends a block after
re-executing its transactions and reproducing the claimed state root.
"""
from __future__ import annotations

import json
import logging
import queue
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from .codec import (
    DIGEST_SIZE,
    INT_MAX,
    ZERO_ADDRESS,
    ZERO_DIGEST,
    Address,
    CodecError,
    decode,
    digest,
    encode,
    leading_zero_bits,
)
from .errors import BlockRejected, ChainError, MiningExhausted
from .runtime import Event, Receipt, Transaction, World

# registers the contract kinds with the runtime
from . import acc, jc, rc  # noqa: F401

log = logging.getLogger(__name__)

DEFAULT_DIFFICULTY = 8
SNAPSHOT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ChainConfig:
    difficulty: int = DEFAULT_DIFFICULTY
    nonce_budget: int = 1 << 22
    allow_empty_blocks: bool = False


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    txs: tuple[Transaction, ...]
    state_root: bytes
    nonce: int
    miner: Address
    timestamp: int

    def canonical(self) -> list:
        return [
            self.height,
            self.prev_hash,
            [tx.canonical() for tx in self.txs],
            self.state_root,
            self.nonce,
            self.miner,
            self.timestamp,
        ]

    @property
    def hash(self) -> bytes:
        return block_hash(self)

    def encode(self) -> bytes:
        return encode(self.canonical())

    @classmethod
    def from_canonical(cls, items) -> Block:
        if not isinstance(items, list) or len(items) != 7 or not isinstance(items[2], list):
            raise CodecError("block must be a 7-item list with a transaction list")
        height, prev_hash, txs, state_root, nonce, miner, timestamp = items
        return cls(height, prev_hash, tuple(Transaction.from_canonical(t) for t in txs), state_root, nonce, miner, timestamp)

    @classmethod
    def decode(cls, data: bytes) -> Block:
        return cls.from_canonical(decode(data))

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "prevHash": self.prev_hash.hex(),
            "txs": [tx.to_json() for tx in self.txs],
            "stateRoot": self.state_root.hex(),
            "nonce": self.nonce,
            "miner": self.miner.hex,
            "timestamp": self.timestamp,
            "hash": self.hash.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> Block:
        return cls(
            data["height"],
            bytes.fromhex(data["prevHash"]),
            tuple(Transaction.from_json(t) for t in data["txs"]),
            bytes.fromhex(data["stateRoot"]),
            data["nonce"],
            Address.from_hex(data["miner"]),
            data["timestamp"],
        )


def block_hash(block: Block) -> bytes:
    return digest(encode(block.canonical()))


def meets_difficulty(block_digest: bytes, difficulty: int) -> bool:
    return leading_zero_bits(block_digest) >= difficulty


@dataclass(frozen=True)
class Genesis:
    """Fixed starting point shared by every replica."""

    seed: int
    accounts: tuple[Address, ...] = ()
    timestamp: int = 0

    @classmethod
    def with_new_accounts(cls, seed: int, count: int, timestamp: int = 0) -> Genesis:
        world = World(seed)
        return cls(seed, tuple(world.create_account() for _ in range(count)), timestamp)

    def world(self) -> World:
        world = World(self.seed)
        for address in self.accounts:
            world.register_account(address)
        return world

    def block(self) -> Block:
        return Block(0, ZERO_DIGEST, (), self.world().digest(), 0, ZERO_ADDRESS, self.timestamp)

    def to_json(self) -> dict:
        return {"seed": self.seed, "accounts": [a.hex for a in self.accounts], "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, data: dict) -> Genesis:
        return cls(data["seed"], tuple(Address.from_hex(a) for a in data["accounts"]), data["timestamp"])


class Subscription:
    """Ordered stream of events from accepted blocks that match a filter."""

    def __init__(self, emitter: Optional[Address] = None, name: Optional[str] = None):
        self.emitter = emitter
        self.name = name
        self._queue: queue.Queue[Event] = queue.Queue()

    def matches(self, event: Event) -> bool:
        return (self.emitter is None or event.emitter == self.emitter) and (self.name is None or event.name == self.name)

    def _deliver(self, event: Event) -> None:
        if self.matches(event):
            self._queue.put(event)

    def get(self, timeout: Optional[float] = None) -> Event:
        return self._queue.get(timeout=timeout)

    def drain(self) -> list[Event]:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def __iter__(self) -> Iterator[Event]:
        return iter(self.drain())


@dataclass
class _Included:
    height: int
    tx: Transaction
    receipt: Receipt


class NodeState:
    def __init__(self, genesis: Genesis, config: ChainConfig = ChainConfig()):
        self.genesis = genesis
        self.config = config
        self.chain: list[Block] = [genesis.block()]
        self.world = genesis.world()
        self.mempool: list[Transaction] = []
        self.event_log: list[Event] = []
        self._included: dict[bytes, _Included] = {}
        self._subscriptions: list[Subscription] = []

    @property
    def tip(self) -> Block:
        return self.chain[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    @property
    def state_root(self) -> bytes:
        return self.world.digest()

    # -- mempool ------------------------------------------------------------

    def submit(self, tx: Transaction) -> None:
        if not tx.is_well_formed():
            raise ChainError("malformed transaction")
        if not self.world.is_account(tx.sender):
            raise ChainError(f"sender {tx.sender} is not a registered account")
        if tx.tx_id in self._included or any(p.tx_id == tx.tx_id for p in self.mempool):
            raise ChainError("duplicate transaction")
        self.mempool.append(tx)

    # -- blocks -------------------------------------------------------------

    @staticmethod
    def _execute(world: World, txs, height: int, timestamp: int) -> list[Receipt]:
        return [world.apply_transaction(tx, height, timestamp) for tx in txs]

    def mine_block(self, miner: Address, timestamp: int) -> Block:
        """Build and seal the next block from the whole mempool; does not append it."""
        if not self.mempool and not self.config.allow_empty_blocks:
            raise MiningExhausted("mempool is empty and empty blocks are disabled")
        txs = tuple(self.mempool)
        height = self.height + 1
        scratch = self.world.copy()
        self._execute(scratch, txs, height, timestamp)
        root = scratch.digest()
        prev = self.tip.hash
        for nonce in range(self.config.nonce_budget):
            block = Block(height, prev, txs, root, nonce, miner, timestamp)
            if meets_difficulty(block.hash, self.config.difficulty):
                return block
        raise MiningExhausted(f"no nonce below {self.config.nonce_budget} meets difficulty {self.config.difficulty}")

    def check_block(self, block: Block) -> tuple[Optional[str], Optional[World], list[Receipt]]:
        """Return ``(failed_check, post_world, receipts)``; ``failed_check`` is None when valid."""
        if not _is_block_shaped(block):
            return "format", None, []
        if block.height != self.height + 1:
            return "height", None, []
        if block.prev_hash != self.tip.hash:
            return "prev-hash", None, []
        try:
            sealed = block.hash
        except CodecError:
            return "format", None, []
        if not meets_difficulty(sealed, self.config.difficulty):
            return "proof-of-work", None, []
        if not block.txs and not self.config.allow_empty_blocks:
            return "empty-block", None, []
        seen: set[bytes] = set()
        for tx in block.txs:
            if not isinstance(tx, Transaction) or not tx.is_well_formed():
                return "transaction-format", None, []
            if not self.world.is_account(tx.sender):
                return "transaction-sender", None, []
            if tx.tx_id in seen or tx.tx_id in self._included:
                return "transaction-replay", None, []
            seen.add(tx.tx_id)
        scratch = self.world.copy()
        receipts = self._execute(scratch, block.txs, block.height, block.timestamp)
        if scratch.digest() != block.state_root:
            return "state-root", None, []
        return None, scratch, receipts

    def validate_block(self, block: Block) -> bool:
        try:
            failed, _, _ = self.check_block(block)
        except Exception:  # malformed input is a verdict, not a crash
            log.debug("block validation raised", exc_info=True)
            return False
        return failed is None

    def validate_encoded(self, data: bytes) -> bool:
        """Validate a block received as canonical bytes; undecodable input is invalid."""
        try:
            block = Block.decode(data)
        except CodecError:
            return False
        return self.validate_block(block)

    def accept_block(self, block: Block) -> NodeState:
        try:
            failed, world, receipts = self.check_block(block)
        except Exception as exc:
            raise BlockRejected("format", str(exc)) from exc
        if failed is not None:
            raise BlockRejected(failed)
        self.chain.append(block)
        self.world = world
        included = {tx.tx_id for tx in block.txs}
        self.mempool = [tx for tx in self.mempool if tx.tx_id not in included]
        for tx, receipt in zip(block.txs, receipts):
            self._included[tx.tx_id] = _Included(block.height, tx, receipt)
            for event in receipt.events:
                self.event_log.append(event)
                for sub in self._subscriptions:
                    sub._deliver(event)
        return self

    # -- queries ------------------------------------------------------------

    def receipt(self, tx_id: bytes) -> Optional[Receipt]:
        found = self._included.get(tx_id)
        return found.receipt if found else None

    def transaction(self, tx_id: bytes) -> Optional[Transaction]:
        found = self._included.get(tx_id)
        return found.tx if found else None

    def receipts_at(self, height: int) -> list[tuple[Transaction, Receipt]]:
        return [(tx, self._included[tx.tx_id].receipt) for tx in self.chain[height].txs]

    def subscribe(self, emitter: Optional[Address] = None, name: Optional[str] = None) -> Subscription:
        """Live subscription: sees events of blocks accepted from now on."""
        sub = Subscription(emitter, name)
        self._subscriptions.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        self._subscriptions.remove(sub)

    def events(self, emitter: Optional[Address] = None, name: Optional[str] = None) -> list[Event]:
        probe = Subscription(emitter, name)
        return [e for e in self.event_log if probe.matches(e)]


def _is_block_shaped(block: object) -> bool:
    if not isinstance(block, Block):
        return False
    ints_ok = all(type(v) is int for v in (block.height, block.nonce, block.timestamp))
    return (
        ints_ok
        and 0 <= block.nonce <= INT_MAX
        and isinstance(block.prev_hash, bytes)
        and len(block.prev_hash) == DIGEST_SIZE
        and isinstance(block.state_root, bytes)
        and len(block.state_root) == DIGEST_SIZE
        and isinstance(block.miner, Address)
        and isinstance(block.txs, tuple)
    )


# -- snapshot files ----------------------------------------------------------


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    genesis: Genesis
    config: ChainConfig
    blocks: list[Block] = field(default_factory=list)
    final_state_root: bytes = ZERO_DIGEST
    recorded_hashes: list[str] = field(default_factory=list)


def snapshot_dict(node: NodeState) -> dict:
    return {
        "schemaVersion": SNAPSHOT_SCHEMA_VERSION,
        "genesis": node.genesis.to_json(),
        "difficulty": node.config.difficulty,
        "allowEmptyBlocks": node.config.allow_empty_blocks,
        "blocks": [b.to_json() for b in node.chain[1:]],
        "finalStateRoot": node.state_root.hex(),
    }


def save_snapshot(node: NodeState, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(snapshot_dict(node), indent=1, sort_keys=True) + "\n")
    return path


def parse_snapshot(data: dict) -> Snapshot:
    try:
        if data.get("schemaVersion") != SNAPSHOT_SCHEMA_VERSION:
            raise SnapshotError(f"unsupported schemaVersion {data.get('schemaVersion')!r}")
        config = ChainConfig(difficulty=data["difficulty"], allow_empty_blocks=data.get("allowEmptyBlocks", False))
        blocks = [Block.from_json(b) for b in data["blocks"]]
        return Snapshot(
            Genesis.from_json(data["genesis"]),
            config,
            blocks,
            bytes.fromhex(data["finalStateRoot"]),
            [b.get("hash", "") for b in data["blocks"]],
        )
    except SnapshotError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from exc


def load_snapshot(path) -> Snapshot:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"not JSON: {exc}") from exc
    return parse_snapshot(data)


def replay(snapshot: Snapshot) -> NodeState:
    """Fresh replica that accepts every block of ``snapshot``; raises BlockRejected."""
    node = NodeState(snapshot.genesis, snapshot.config)
    for block in snapshot.blocks:
        node.accept_block(block)
    return node


def verify_snapshot(path) -> bool:
    snapshot = load_snapshot(path)
    try:
        node = replay(snapshot)
    except BlockRejected as exc:
        log.info("snapshot block rejected: %s", exc)
        return False
    for block, recorded in zip(snapshot.blocks, snapshot.recorded_hashes):
        if recorded and recorded != block.hash.hex():
            return False
    return node.state_root == snapshot.final_state_root
