"""Register Contract: the method lookup table."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import errors
from .codec import Address
from .runtime import Blankable, Context, Contract, abi


def split_abi_list(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def join_abi_list(names) -> str:
    return ",".join(names)


@dataclass(frozen=True)
class MethodEntry:
    method_name: str
    subject: Optional[Address]
    object: Optional[Address]
    sc_name: str
    creator: Address
    sc_address: Address
    abi_list: tuple[str, ...]

    def state_tree(self) -> list:
        return [self.method_name, self.subject, self.object, self.sc_name, self.creator, self.sc_address, list(self.abi_list)]


class RegisterContract(Contract):
    """Maps method names to the contract that implements them.

    ABI lists travel as comma-separated strings on the wire.
    """

    kind = "RC"

    def __init__(self, address: Address, creator: Address):
        super().__init__(address, creator)
        self.table: dict[str, MethodEntry] = {}

    def state_tree(self) -> dict:
        return {name: entry.state_tree() for name, entry in self.table.items()}

    def _entry(self, method_name: str) -> MethodEntry:
        try:
            return self.table[method_name]
        except KeyError:
            raise errors.NoSuchMethod(method_name) from None

    @staticmethod
    def _require_live(ctx: Context, address: Address) -> None:
        if not ctx.world.is_alive(address):
            raise errors.DanglingAddress(f"no live contract at {address}")

    @abi("methodRegister", str, Blankable, Blankable, str, Address, Address, str)
    def method_register(self, ctx: Context, method_name, subject, obj, sc_name, creator, sc_address, abi_list) -> None:
        if ctx.caller != creator:
            raise errors.CreatorMismatch("caller must be the method creator")
        if method_name in self.table:
            raise errors.DuplicateName(method_name)
        self._require_live(ctx, sc_address)
        self.table[method_name] = MethodEntry(method_name, subject, obj, sc_name, creator, sc_address, split_abi_list(abi_list))

    @abi("methodUpdate", str, str, Address, str)
    def method_update(self, ctx: Context, method_name: str, sc_name: str, sc_address: Address, abi_list: str) -> None:
        entry = self._entry(method_name)
        if ctx.caller != entry.creator:
            raise errors.PermissionDenied("only the method creator may update it")
        self._require_live(ctx, sc_address)
        self.table[method_name] = MethodEntry(
            method_name, entry.subject, entry.object, sc_name, entry.creator, sc_address, split_abi_list(abi_list)
        )

    @abi("methodDelete", str)
    def method_delete(self, ctx: Context, method_name: str) -> None:
        entry = self._entry(method_name)
        if ctx.caller != entry.creator:
            raise errors.PermissionDenied("only the method creator may delete it")
        del self.table[method_name]

    @abi("getContract", str, mutating=False)
    def get_contract(self, ctx: Context, method_name: str) -> tuple[Address, str]:
        entry = self._entry(method_name)
        return entry.sc_address, join_abi_list(entry.abi_list)

    @abi("getMethod", str, mutating=False)
    def get_method(self, ctx: Context, method_name: str) -> MethodEntry:
        return self._entry(method_name)
