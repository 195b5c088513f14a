"""Simulated IoT peers and the framework's orchestration procedures.

Every peer except IoT devices runs a replica (:class:`~contractacl.chain.NodeState`).
Gateways hold the accounts of their local IoT devices and submit transactions
with them.  A :class:`Network` advances in rounds: pending transactions are
mined into one block by the scheduled miner and every replica validates and
accepts it.  :class:`Framework` builds the multi-transaction procedures
(register/update/delete a method, policy changes, access requests and
monitoring) on top of that.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence, Union

from .acc import ACC_ABIS, KEEP_INT, KEEP_PERMISSION
from .chain import Block, ChainConfig, Genesis, NodeState
from .codec import Address
from .errors import AgencyViolation, MiningExhausted, PendingTimeout, RequestFailed, StepFailed
from .rc import MethodEntry, join_abi_list, split_abi_list
from .runtime import Event, Receipt, Transaction

log = logging.getLogger(__name__)

TOPOLOGY_SCHEMA_VERSION = 1
JC_METHOD = "JC"
JC_ABIS = ("misbehaviorJudge", "deleteJC")


class Role(str, Enum):
    SERVER = "server"
    STORAGE = "storage"
    USER_DEVICE = "userDevice"
    GATEWAY = "gateway"
    IOT_DEVICE = "iotDevice"


@dataclass
class Peer:
    name: str
    role: Role
    account: Address
    gateway_of: list[Address] = field(default_factory=list)
    agent: Optional[Address] = None
    miner: bool = False

    @property
    def runs_client(self) -> bool:
        return self.role is not Role.IOT_DEVICE


@dataclass(frozen=True)
class PeerSpec:
    name: str
    role: Role
    agent: Optional[str] = None
    miner: bool = False


@dataclass(frozen=True)
class Topology:
    seed: int
    peers: tuple[PeerSpec, ...]

    def __post_init__(self) -> None:
        names = [p.name for p in self.peers]
        if len(set(names)) != len(names):
            raise ValueError("peer names must be unique")
        roles = {p.name: p.role for p in self.peers}
        for p in self.peers:
            if p.role is Role.IOT_DEVICE:
                if p.agent is None or roles.get(p.agent) is not Role.GATEWAY:
                    raise ValueError(f"IoT device {p.name} needs a gateway agent")
            elif p.agent is not None:
                raise ValueError(f"only IoT devices have agents ({p.name})")

    @classmethod
    def from_dict(cls, data: dict) -> Topology:
        if data.get("schemaVersion", TOPOLOGY_SCHEMA_VERSION) != TOPOLOGY_SCHEMA_VERSION:
            raise ValueError(f"unsupported topology schemaVersion {data.get('schemaVersion')!r}")
        peers = tuple(
            PeerSpec(p["id"], Role(p["role"]), p.get("agent"), bool(p.get("miner", False))) for p in data["peers"]
        )
        return cls(int(data.get("seed", 0)), peers)

    @classmethod
    def load(cls, path) -> Topology:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        peers = []
        for p in self.peers:
            item = {"id": p.name, "role": p.role.value}
            if p.agent:
                item["agent"] = p.agent
            if p.miner:
                item["miner"] = True
            peers.append(item)
        return {"schemaVersion": TOPOLOGY_SCHEMA_VERSION, "seed": self.seed, "peers": peers}


@dataclass(frozen=True)
class Submission:
    submitter: str
    sender: Address
    tx_id: bytes


class Network:
    """Replicas plus a round-robin miner schedule; one block per round."""

    def __init__(self, topology: Topology, difficulty: int = 8, genesis_time: int = 0, nonce_budget: int = 1 << 22):
        self.topology = topology
        self.genesis = Genesis.with_new_accounts(topology.seed, len(topology.peers), genesis_time)
        self.config = ChainConfig(difficulty=difficulty, nonce_budget=nonce_budget)
        self.peers: dict[str, Peer] = {}
        for spec, account in zip(topology.peers, self.genesis.accounts):
            self.peers[spec.name] = Peer(spec.name, spec.role, account, miner=spec.miner)
        for spec in topology.peers:
            if spec.agent is not None:
                device, gateway = self.peers[spec.name], self.peers[spec.agent]
                device.agent = gateway.account
                gateway.gateway_of.append(device.account)
        self._by_account = {p.account: p for p in self.peers.values()}
        self.nodes: dict[str, NodeState] = {
            p.name: NodeState(self.genesis, self.config) for p in self.peers.values() if p.runs_client
        }
        self.miners = [p for p in self.peers.values() if p.runs_client and p.miner] or [
            p for p in self.peers.values() if p.runs_client
        ]
        self.submissions: list[Submission] = []
        self.block_listeners: list[Callable[[Block], None]] = []
        self._round = 0
        self._nonces: dict[Address, int] = {}

    def peer(self, name: str) -> Peer:
        return self.peers[name]

    def peer_by_account(self, account: Address) -> Optional[Peer]:
        return self._by_account.get(account)

    def agent_of(self, peer: Peer) -> Peer:
        """The peer that submits transactions for ``peer``."""
        return peer if peer.runs_client else self._by_account[peer.agent]

    def node_of(self, peer: Peer) -> NodeState:
        return self.nodes[self.agent_of(peer).name]

    @property
    def reference_node(self) -> NodeState:
        return next(iter(self.nodes.values()))

    def submit(self, submitter: Peer, sender: Address, target: Optional[Address], abi_name: str, args: Sequence = (), time: int = 0) -> Transaction:
        """Broadcast a transaction signed with ``sender`` by ``submitter``."""
        if not submitter.runs_client:
            raise AgencyViolation(f"{submitter.name} has no client; its gateway must submit")
        if sender != submitter.account and sender not in submitter.gateway_of:
            raise AgencyViolation(f"{submitter.name} does not hold account {sender}")
        nonce = self._nonces.get(sender, 0)
        self._nonces[sender] = nonce + 1
        tx = Transaction.create(sender, target, abi_name, tuple(args), time, nonce)
        for node in self.nodes.values():
            node.submit(tx)
        self.submissions.append(Submission(submitter.name, sender, tx.tx_id))
        return tx

    @property
    def pending(self) -> bool:
        return bool(self.reference_node.mempool)

    def run_round(self, timestamp: int) -> Optional[Block]:
        """Mine pending transactions into one block and have every replica accept it."""
        if not self.pending:
            return None
        miner = self.miners[self._round % len(self.miners)]
        self._round += 1
        block = self.nodes[miner.name].mine_block(miner.account, timestamp)
        for node in self.nodes.values():
            node.accept_block(block)
        for listener in self.block_listeners:
            listener(block)
        return block

    def receipt(self, tx_id: bytes) -> Optional[Receipt]:
        return self.reference_node.receipt(tx_id)

    def call(self, peer: Peer, target: Address, abi_name: str, args: Sequence = ()) -> tuple:
        """Read-only call against the replica ``peer`` reads from."""
        return self.node_of(peer).world.call(peer.account, target, abi_name, tuple(args))

    def agency_violations(self) -> list[Submission]:
        """Included transactions whose sender is an IoT device but were not submitted by its gateway."""
        by_tx = {s.tx_id: s for s in self.submissions}
        bad = []
        for block in self.reference_node.chain[1:]:
            for tx in block.txs:
                sub = by_tx.get(tx.tx_id)
                owner = self._by_account.get(tx.sender)
                if sub is None:
                    bad.append(Submission("?", tx.sender, tx.tx_id))
                elif owner is not None and not owner.runs_client:
                    if self.peers[sub.submitter].account != owner.agent:
                        bad.append(sub)
        return bad


@dataclass(frozen=True)
class PolicySpec:
    resource: str
    action: str
    permission: str = "allow"
    min_interval: int = 100
    threshold: int = 2

    def args(self) -> tuple:
        return (self.resource, self.action, self.permission, self.min_interval, self.threshold)

    @classmethod
    def from_dict(cls, data: dict) -> PolicySpec:
        return cls(
            data["resource"],
            data["action"],
            data.get("permission", "allow"),
            int(data.get("minInterval", 100)),
            int(data.get("threshold", 2)),
        )


@dataclass(frozen=True)
class AccessOutcome:
    """One access decision as seen by a subject or an object monitor.

    ``tx_id`` is excluded from equality so transcripts of the subject-called
    and object-forwarded flows, which use different transactions, compare equal.
    """

    method_name: str
    resource: str
    action: str
    time: int
    result: bool
    penalty: int
    tx_id: bytes = field(default=b"", compare=False)

    def to_json(self) -> dict:
        return {
            "method": self.method_name,
            "resource": self.resource,
            "action": self.action,
            "time": self.time,
            "result": self.result,
            "penalty": self.penalty,
            "txId": self.tx_id.hex(),
        }


def _outcome(method_name: str, tx: Transaction, event: Event) -> AccessOutcome:
    resource, action, time = tx.args
    result, penalty = event.payload
    return AccessOutcome(method_name, resource, action, time, result, penalty, tx.tx_id)


@dataclass
class PendingRequest:
    method_name: str
    tx: Transaction
    node: NodeState
    acc: Address


class Monitor:
    """Live stream of access outcomes of one method, read from ``peer``'s replica.

    ``on_outcome`` is invoked for every outcome; for an IoT device this is
    its gateway notifying it locally.
    """

    def __init__(self, framework: Framework, peer: Peer, method_name: str, on_outcome: Optional[Callable[[AccessOutcome], None]] = None):
        self.peer = peer
        self.method_name = method_name
        self.on_outcome = on_outcome
        self.acc, _ = framework.get_contract(peer, method_name)
        self._node = framework.network.node_of(peer)
        self._sub = self._node.subscribe(self.acc, "returnResult")
        self.transcript: list[AccessOutcome] = []

    def poll(self) -> list[AccessOutcome]:
        fresh = []
        for event in self._sub.drain():
            outcome = _outcome(self.method_name, self._node.transaction(event.tx_id), event)
            fresh.append(outcome)
            if self.on_outcome is not None:
                self.on_outcome(outcome)
        self.transcript.extend(fresh)
        return fresh

    def __iter__(self) -> Iterator[AccessOutcome]:
        return iter(self.poll())

    def close(self) -> None:
        self._node.unsubscribe(self._sub)


PeerOrName = Union[Peer, str]


class Framework:
    """Register/update/delete methods, manage policies and run access control."""

    def __init__(self, network: Network, max_wait_rounds: int = 1):
        self.network = network
        self.max_wait_rounds = max_wait_rounds
        self.rc: Optional[Address] = None

    def _peer(self, peer: PeerOrName) -> Peer:
        return self.network.peer(peer) if isinstance(peer, str) else peer

    # -- plumbing ---------------------------------------------------------

    def _run(self, procedure: str, step: int, actor: Peer, sender: Address, target, abi_name: str, args, time: int) -> Receipt:
        net = self.network
        tx = net.submit(net.agent_of(actor), sender, target, abi_name, args, time)
        net.run_round(time)
        receipt = net.receipt(tx.tx_id)
        if receipt is None:
            raise PendingTimeout(f"{procedure} step {step} not mined")
        if not receipt.ok:
            raise StepFailed(procedure, step, receipt.status, receipt.error)
        return receipt

    def _acting_account(self, actor: Peer, owner: Address) -> Address:
        """``owner`` if ``actor`` is it or its gateway, else the actor's own account."""
        if actor.account == owner or owner in actor.gateway_of:
            return owner
        return actor.account

    def _require_rc(self) -> Address:
        if self.rc is None:
            raise RuntimeError("register contract not deployed")
        return self.rc

    def get_contract(self, peer: PeerOrName, method_name: str) -> tuple[Address, tuple[str, ...]]:
        address, abis = self.network.call(self._peer(peer), self._require_rc(), "getContract", (method_name,))
        return address, split_abi_list(abis)

    def get_method(self, peer: PeerOrName, method_name: str) -> MethodEntry:
        (entry,) = self.network.call(self._peer(peer), self._require_rc(), "getMethod", (method_name,))
        return entry

    # -- contracts --------------------------------------------------------

    def deploy_register(self, peer: PeerOrName, time: int = 0) -> Address:
        peer = self._peer(peer)
        receipt = self._run("deployRC", 1, peer, peer.account, None, "RC", (), time)
        self.rc = receipt.return_values[0]
        return self.rc

    def deploy_judge(self, peer: PeerOrName, base: int, interval: int, penalty_unit: int = 60, time: int = 0, method_name: str = JC_METHOD) -> Address:
        """Deploy a JC and register it (blank subject and object) in the RC."""
        peer = self._peer(peer)
        rc = self._require_rc()
        receipt = self._run("registerJudge", 1, peer, peer.account, None, "JC", (base, interval, penalty_unit), time)
        jc = receipt.return_values[0]
        args = (method_name, "", "", "Judge", peer.account, jc, join_abi_list(JC_ABIS))
        self._run("registerJudge", 2, peer, peer.account, rc, "methodRegister", args, time)
        return jc

    def register_access_control_method(
        self,
        creator: PeerOrName,
        subject: PeerOrName,
        obj: PeerOrName,
        method_name: str,
        policies: Sequence[PolicySpec] = (),
        time: int = 0,
        sc_name: Optional[str] = None,
        strict_time: bool = False,
        judge_method: str = JC_METHOD,
    ) -> str:
        """Deploy an ACC for (subject, object), point it at the JC, seed policies and register it.

        ``creator`` must be the object or the gateway acting for it.
        Steps: 1 deploy, 2 setJC, 3.. one per policy, last methodRegister.
        """
        creator, subject, obj = self._peer(creator), self._peer(subject), self._peer(obj)
        if creator.account != obj.account and obj.account not in creator.gateway_of:
            raise AgencyViolation(f"{creator.name} is neither {obj.name} nor its gateway")
        rc = self._require_rc()
        owner = obj.account
        name = "register"
        acc = self._run(name, 1, creator, owner, None, "ACC", (subject.account, owner, strict_time), time).return_values[0]
        jc, _ = self.get_contract(creator, judge_method)
        self._run(name, 2, creator, owner, acc, "setJC", (jc,), time)
        step = 3
        for policy in policies:
            self._run(name, step, creator, owner, acc, "policyAdd", policy.args(), time)
            step += 1
        args = (method_name, subject.account, owner, sc_name or method_name, owner, acc, join_abi_list(ACC_ABIS))
        self._run(name, step, creator, owner, rc, "methodRegister", args, time)
        return method_name

    def update_access_control_method(
        self,
        creator: PeerOrName,
        method_name: str,
        policies: Sequence[PolicySpec] = (),
        time: int = 0,
        sc_name: Optional[str] = None,
        strict_time: bool = False,
        judge_method: str = JC_METHOD,
    ) -> Address:
        """Replace a method's ACC: deploy new, setJC, seed policies, methodUpdate, deleteACC old."""
        creator = self._peer(creator)
        rc = self._require_rc()
        entry = self.get_method(creator, method_name)
        sender = self._acting_account(creator, entry.creator)
        name = "update"
        acc = self._run(name, 1, creator, sender, None, "ACC", (entry.subject, entry.object, strict_time), time).return_values[0]
        jc, _ = self.get_contract(creator, judge_method)
        self._run(name, 2, creator, sender, acc, "setJC", (jc,), time)
        step = 3
        for policy in policies:
            self._run(name, step, creator, sender, acc, "policyAdd", policy.args(), time)
            step += 1
        args = (method_name, sc_name or entry.sc_name, acc, join_abi_list(ACC_ABIS))
        self._run(name, step, creator, sender, rc, "methodUpdate", args, time)
        self._run(name, step + 1, creator, sender, entry.sc_address, "deleteACC", (), time)
        return acc

    def delete_access_control_method(self, creator: PeerOrName, method_name: str, time: int = 0) -> None:
        creator = self._peer(creator)
        rc = self._require_rc()
        entry = self.get_method(creator, method_name)
        sender = self._acting_account(creator, entry.creator)
        self._run("delete", 1, creator, sender, rc, "methodDelete", (method_name,), time)
        self._run("delete", 2, creator, sender, entry.sc_address, "deleteACC", (), time)

    def _policy_tx(self, creator: PeerOrName, method_name: str, abi_name: str, args: tuple, time: int) -> Receipt:
        creator = self._peer(creator)
        entry = self.get_method(creator, method_name)
        sender = self._acting_account(creator, entry.creator)
        return self._run(abi_name, 1, creator, sender, entry.sc_address, abi_name, args, time)

    def add_policy(self, creator: PeerOrName, method_name: str, policy: PolicySpec, time: int = 0) -> None:
        self._policy_tx(creator, method_name, "policyAdd", policy.args(), time)

    def update_policy(
        self,
        creator: PeerOrName,
        method_name: str,
        resource: str,
        action: str,
        permission: Optional[str] = None,
        min_interval: Optional[int] = None,
        threshold: Optional[int] = None,
        time: int = 0,
    ) -> None:
        args = (
            resource,
            action,
            KEEP_PERMISSION if permission is None else permission,
            KEEP_INT if min_interval is None else min_interval,
            KEEP_INT if threshold is None else threshold,
        )
        self._policy_tx(creator, method_name, "policyUpdate", args, time)

    def delete_policy(self, creator: PeerOrName, method_name: str, resource: str, action: str, time: int = 0) -> None:
        self._policy_tx(creator, method_name, "policyDelete", (resource, action), time)

    # -- access control ---------------------------------------------------

    def submit_request(self, subject: PeerOrName, method_name: str, resource: str, action: str, time: int, via: Optional[PeerOrName] = None) -> PendingRequest:
        """Look the ACC up in the RC and send the accessControl transaction.

        With ``via`` the object forwards the request with its own account.
        """
        subject = self._peer(subject)
        sender = self._peer(via) if via is not None else subject
        acc, _ = self.get_contract(sender, method_name)
        node = self.network.node_of(subject)
        tx = self.network.submit(self.network.agent_of(sender), sender.account, acc, "accessControl", (resource, action, time), time)
        return PendingRequest(method_name, tx, node, acc)

    def collect(self, pending: PendingRequest) -> AccessOutcome:
        receipt = pending.node.receipt(pending.tx.tx_id)
        if receipt is None:
            raise PendingTimeout(f"accessControl transaction {pending.tx.tx_id.hex()[:12]} not mined")
        if not receipt.ok:
            raise RequestFailed(receipt)
        # txId correlation: concurrent requests never cross-match
        for event in pending.node.events(pending.acc, "returnResult"):
            if event.tx_id == pending.tx.tx_id:
                return _outcome(pending.method_name, pending.tx, event)
        raise PendingTimeout("returnResult event not found")

    def wait(self, pending: PendingRequest, time: int) -> AccessOutcome:
        for _ in range(self.max_wait_rounds):
            if pending.node.receipt(pending.tx.tx_id) is not None:
                break
            try:
                self.network.run_round(time)
            except MiningExhausted as exc:
                log.warning("mining stalled: %s", exc)
        return self.collect(pending)

    def request_access(self, subject: PeerOrName, method_name: str, resource: str, action: str, time: int, via: Optional[PeerOrName] = None) -> AccessOutcome:
        return self.wait(self.submit_request(subject, method_name, resource, action, time, via), time)

    def monitor_access(self, obj: PeerOrName, method_name: str, on_outcome: Optional[Callable[[AccessOutcome], None]] = None) -> Monitor:
        return Monitor(self, self._peer(obj), method_name, on_outcome)
