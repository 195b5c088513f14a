"""Deterministic contract execution.

Contracts are native Python state machines dispatched by a kind tag.  A
:class:`World` owns the accounts and contract records; transactions enter
through :meth:`World.apply_transaction`, which is all-or-nothing, and
contracts reach each other with messages via :meth:`Context.send`.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar, Optional

from . import errors
from .codec import (
    Address,
    CodecError,
    digest,
    encode,
    is_typed_value,
    value_from_json,
    value_to_json,
)

MAX_CALL_DEPTH = 8


class Blankable:
    """Signature marker: an Address, or ``""`` meaning a blank field."""


@dataclass(frozen=True)
class Transaction:
    """An account-originated ABI invocation (``target=None`` deploys ``abi_name`` as a contract kind)."""

    sender: Address
    target: Optional[Address]
    abi_name: str
    args: tuple = ()
    supplied_time: int = 0
    nonce: int = 0
    tx_id: bytes = b""

    @classmethod
    def create(cls, sender, target, abi_name, args=(), supplied_time=0, nonce=0) -> Transaction:
        tx = cls(sender, target, abi_name, tuple(args), supplied_time, nonce)
        return cls(sender, target, abi_name, tuple(args), supplied_time, nonce, tx.compute_id())

    @property
    def is_deployment(self) -> bool:
        return self.target is None

    def body(self) -> list:
        return [self.sender, self.target, self.abi_name, list(self.args), self.supplied_time, self.nonce]

    def compute_id(self) -> bytes:
        return digest(encode(self.body()))

    def canonical(self) -> list:
        return self.body() + [self.tx_id]

    @classmethod
    def from_canonical(cls, items: Any) -> Transaction:
        if not isinstance(items, list) or len(items) != 7:
            raise CodecError("transaction must be a 7-item list")
        sender, target, abi_name, args, supplied_time, nonce, tx_id = items
        if not isinstance(args, list):
            raise CodecError("transaction args must be a list")
        return cls(sender, target, abi_name, tuple(args), supplied_time, nonce, tx_id)

    def is_well_formed(self) -> bool:
        if not isinstance(self.sender, Address):
            return False
        if self.target is not None and not isinstance(self.target, Address):
            return False
        if not isinstance(self.abi_name, str) or not self.abi_name:
            return False
        if type(self.supplied_time) is not int or type(self.nonce) is not int:
            return False
        if not all(is_typed_value(a) for a in self.args):
            return False
        try:
            return self.tx_id == self.compute_id()
        except CodecError:
            return False

    def to_json(self) -> dict:
        return {
            "sender": self.sender.hex,
            "target": self.target.hex if self.target is not None else None,
            "abi": self.abi_name,
            "args": [value_to_json(a) for a in self.args],
            "time": self.supplied_time,
            "nonce": self.nonce,
            "txId": self.tx_id.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> Transaction:
        target = data["target"]
        return cls(
            Address.from_hex(data["sender"]),
            Address.from_hex(target) if target is not None else None,
            data["abi"],
            tuple(value_from_json(a) for a in data["args"]),
            data["time"],
            data["nonce"],
            bytes.fromhex(data["txId"]),
        )


@dataclass(frozen=True)
class Message:
    from_contract: Address
    target: Address
    abi_name: str
    args: tuple = ()


@dataclass(frozen=True)
class Event:
    emitter: Address
    name: str
    payload: tuple
    block_height: int
    tx_id: bytes

    def to_json(self) -> dict:
        return {
            "emitter": self.emitter.hex,
            "name": self.name,
            "payload": [value_to_json(v) for v in self.payload],
            "height": self.block_height,
            "txId": self.tx_id.hex(),
        }


@dataclass(frozen=True)
class Receipt:
    tx_id: bytes
    status: str
    error: str = ""
    return_values: tuple = ()
    events: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_json(self) -> dict:
        return {
            "txId": self.tx_id.hex(),
            "status": self.status,
            "error": self.error,
            "returnValues": [value_to_json(v) if is_typed_value(v) else ["repr", repr(v)] for v in self.return_values],
            "events": [e.to_json() for e in self.events],
        }


@dataclass
class ContractRecord:
    address: Address
    creator: Address
    kind: str
    contract: Optional[Contract]
    alive: bool = True

    def state_tree(self) -> list:
        state = self.contract.state_tree() if self.contract is not None else None
        return [self.kind, self.creator, self.alive, state]


@dataclass(frozen=True)
class AbiSpec:
    name: str
    signature: tuple
    method: str
    mutating: bool


def abi(name: str, *signature: type, mutating: bool = True) -> Callable:
    """Expose a contract method as ABI ``name`` taking arguments of ``signature``."""

    def decorate(fn: Callable) -> Callable:
        fn._abi = AbiSpec(name, signature, fn.__name__, mutating)
        return fn

    return decorate


def check_args(signature: tuple, args: tuple, optional: tuple = ()) -> list:
    if not len(signature) <= len(args) <= len(signature) + len(optional):
        raise errors.MalformedArgs(f"expected {len(signature)} arguments, got {len(args)}")
    out = []
    for i, (kind, value) in enumerate(zip(signature + optional, args)):
        if kind is Blankable:
            if value == "":
                value = None
            elif not isinstance(value, Address):
                raise errors.MalformedArgs(f"argument {i} must be an address or blank")
        elif type(value) is not kind:
            raise errors.MalformedArgs(f"argument {i} must be {kind.__name__}, got {type(value).__name__}")
        out.append(value)
    return out


KINDS: dict[str, type[Contract]] = {}


class Contract:
    """Base class for native contracts.

    Subclasses set ``kind`` and ``init_signature`` and decorate methods with
    :func:`abi`.  Each ABI method receives a :class:`Context` followed by the
    checked arguments.
    """

    kind: ClassVar[str] = ""
    init_signature: ClassVar[tuple] = ()
    init_optional: ClassVar[tuple] = ()
    abis: ClassVar[dict[str, AbiSpec]] = {}

    def __init_subclass__(cls, **kwargs: Any) -> None:
        super().__init_subclass__(**kwargs)
        table: dict[str, AbiSpec] = {}
        for klass in reversed(cls.__mro__):
            for attr in vars(klass).values():
                spec = getattr(attr, "_abi", None)
                if spec is not None:
                    table[spec.name] = spec
        cls.abis = table
        if cls.kind:
            KINDS[cls.kind] = cls

    def __init__(self, address: Address, creator: Address, *init_args: Any):
        self.address = address
        self.creator = creator

    def state_tree(self) -> Any:
        raise NotImplementedError


@dataclass
class _Frame:
    """Per-transaction execution data shared by nested calls."""

    tx_id: bytes
    block_height: int
    block_time: int
    events: list = field(default_factory=list)


class Context:
    """What an executing ABI sees: its caller, the block, and the world."""

    def __init__(self, world: World, frame: _Frame, caller: Address, this: Address, depth: int, via_message: bool):
        self.world = world
        self._frame = frame
        self.caller = caller
        self.this = this
        self.depth = depth
        self.via_message = via_message

    @property
    def block_height(self) -> int:
        return self._frame.block_height

    @property
    def block_time(self) -> int:
        return self._frame.block_time

    @property
    def tx_id(self) -> bytes:
        return self._frame.tx_id

    def emit(self, name: str, *payload: Any) -> None:
        self._frame.events.append(Event(self.this, name, tuple(payload), self._frame.block_height, self._frame.tx_id))

    def send(self, target: Address, abi_name: str, *args: Any) -> tuple:
        """Invoke another contract synchronously by message."""
        return self.world.invoke_message(Message(self.this, target, abi_name, tuple(args)), self._frame, self.depth + 1)

    def record(self, address: Address) -> Optional[ContractRecord]:
        return self.world.contracts.get(address)


class World:
    """Accounts plus contract records; the state every replica must agree on."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.accounts: list[Address] = []
        self._account_set: set[Address] = set()
        self.contracts: dict[Address, ContractRecord] = {}
        self.account_counter = 0
        self.contract_counter = 0

    # -- accounts -------------------------------------------------------

    def create_account(self) -> Address:
        address = Address.derive("account", self.seed, self.account_counter)
        self.account_counter += 1
        self.register_account(address)
        return address

    def register_account(self, address: Address) -> None:
        if address in self._account_set or address in self.contracts:
            raise ValueError(f"address {address} already in use")
        self.accounts.append(address)
        self._account_set.add(address)

    def is_account(self, address: Any) -> bool:
        return address in self._account_set

    # -- contracts ------------------------------------------------------

    def deploy_contract(self, creator: Address, kind: str, init_args: tuple = ()) -> Address:
        if not self.is_account(creator):
            raise errors.UnknownSender(f"{creator} is not a registered account")
        cls = KINDS.get(kind)
        if cls is None:
            raise errors.UnknownKind(kind)
        checked = check_args(cls.init_signature, tuple(init_args), cls.init_optional)
        address = Address.derive("contract", creator, self.contract_counter)
        contract = cls(address, creator, *checked)
        self.contract_counter += 1
        self.contracts[address] = ContractRecord(address, creator, kind, contract)
        return address

    def is_alive(self, address: Any, kind: Optional[str] = None) -> bool:
        record = self.contracts.get(address)
        return record is not None and record.alive and (kind is None or record.kind == kind)

    def selfdestruct(self, contract: Address, caller: Address) -> None:
        record = self._live_record(contract)
        if caller != record.creator:
            raise errors.PermissionDenied("only the creator may destroy a contract")
        record.alive = False
        record.contract = None

    def _live_record(self, address: Address) -> ContractRecord:
        record = self.contracts.get(address)
        if record is None:
            raise errors.NoSuchContract(str(address))
        if not record.alive:
            raise errors.ContractDestroyed(str(address))
        return record

    def _dispatch(self, frame: _Frame, caller: Address, target: Address, abi_name: str, args: tuple, depth: int, via_message: bool) -> tuple:
        if depth > MAX_CALL_DEPTH:
            raise errors.CallDepthExceeded(f"depth {depth}")
        record = self._live_record(target)
        spec = record.contract.abis.get(abi_name)
        if spec is None:
            raise errors.NoSuchAbi(f"{record.kind}.{abi_name}")
        checked = check_args(spec.signature, tuple(args))
        ctx = Context(self, frame, caller, target, depth, via_message)
        result = getattr(record.contract, spec.method)(ctx, *checked)
        if result is None:
            return ()
        return result if isinstance(result, tuple) else (result,)

    def invoke_message(self, msg: Message, frame: _Frame, depth: int = 1) -> tuple:
        return self._dispatch(frame, msg.from_contract, msg.target, msg.abi_name, msg.args, depth, True)

    # -- entry points -----------------------------------------------------

    def apply_transaction(self, tx: Transaction, block_height: int = 0, block_time: int = 0) -> Receipt:
        """Execute ``tx`` atomically; failures become a non-ok receipt."""
        saved = self._save()
        frame = _Frame(tx.tx_id, block_height, block_time)
        try:
            if not tx.is_well_formed():
                raise errors.MalformedTransaction("transaction id or field types invalid")
            if not self.is_account(tx.sender):
                raise errors.UnknownSender(f"{tx.sender} is not a registered account")
            if tx.is_deployment:
                values: tuple = (self.deploy_contract(tx.sender, tx.abi_name, tx.args),)
            else:
                values = self._dispatch(frame, tx.sender, tx.target, tx.abi_name, tx.args, 0, False)
        except errors.ContractError as exc:
            self._restore(saved)
            return Receipt(tx.tx_id, exc.code, str(exc))
        return Receipt(tx.tx_id, "ok", "", values, tuple(frame.events))

    def call(self, caller: Address, target: Address, abi_name: str, args: tuple = ()) -> tuple:
        """Read-only call: any mutation the ABI makes is discarded."""
        saved = self._save()
        try:
            return copy.deepcopy(self._dispatch(_Frame(b"", 0, 0), caller, target, abi_name, tuple(args), 0, False))
        finally:
            self._restore(saved)

    # -- state ------------------------------------------------------------

    def _save(self) -> tuple:
        return copy.deepcopy(self.contracts), self.contract_counter

    def _restore(self, saved: tuple) -> None:
        self.contracts, self.contract_counter = saved

    def state_tree(self) -> list:
        return [
            self.seed,
            sorted(self.accounts),
            self.account_counter,
            self.contract_counter,
            [[addr, self.contracts[addr].state_tree()] for addr in sorted(self.contracts)],
        ]

    def digest(self) -> bytes:
        return digest(encode(self.state_tree()))

    def copy(self) -> World:
        return copy.deepcopy(self)
