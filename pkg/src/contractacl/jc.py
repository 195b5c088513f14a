"""Judge Contract: per-subject misbehavior history and exponential penalties."""
from __future__ import annotations

import copy
from dataclasses import dataclass

from . import errors
from .codec import INT_MAX, Address
from .runtime import Context, Contract, abi

PENALTY_CAP = (1 << 31) - 1
DEFAULT_PENALTY_UNIT = 60


@dataclass
class JudgeRecord:
    object: Address
    misbehavior: str
    time: int
    penalty: int = 0
    capped: bool = False

    def state_tree(self) -> list:
        return [self.object, self.misbehavior, self.time, self.penalty, self.capped]


def penalty_seconds(base: int, interval: int, count: int, unit: int, cap: int = PENALTY_CAP) -> tuple[int, bool]:
    """``base ** (count // interval) * unit`` seconds, saturating at ``cap``.

    Returns the penalty and whether it was capped.
    """
    value = unit
    for _ in range(count // interval):
        value *= base
        if value > cap:
            return cap, True
    if value > cap:
        return cap, True
    return value, False


class JudgeContract(Contract):
    """Accepts every report from an ACC as misbehavior and prices it by history length.

    Init arguments are ``(base, interval, penaltyUnitSeconds[, penaltyCap])``.
    Override :meth:`judge` for a different judging method.
    """

    kind = "JC"
    init_signature = (int, int, int)
    init_optional = (int,)

    def __init__(
        self,
        address: Address,
        creator: Address,
        base: int,
        interval: int,
        penalty_unit: int = DEFAULT_PENALTY_UNIT,
        penalty_cap: int = PENALTY_CAP,
    ):
        super().__init__(address, creator)
        if base < 1 or interval < 1 or penalty_unit < 1:
            raise errors.MalformedArgs("base, interval and penaltyUnitSeconds must be positive")
        if not 1 <= penalty_cap <= INT_MAX:
            raise errors.MalformedArgs("penaltyCap out of range")
        self.base = base
        self.interval = interval
        self.penalty_unit = penalty_unit
        self.penalty_cap = penalty_cap
        self.records: dict[Address, list[JudgeRecord]] = {}

    def state_tree(self) -> list:
        return [
            self.base,
            self.interval,
            self.penalty_unit,
            self.penalty_cap,
            {subject: [r.state_tree() for r in recs] for subject, recs in self.records.items()},
        ]

    def judge(self, history: list[JudgeRecord]) -> tuple[int, bool]:
        return penalty_seconds(self.base, self.interval, len(history), self.penalty_unit, self.penalty_cap)

    @abi("misbehaviorJudge", Address, Address, str, int)
    def misbehavior_judge(self, ctx: Context, subject: Address, obj: Address, misbehavior: str, time: int) -> int:
        if not ctx.via_message or not ctx.world.is_alive(ctx.caller, "ACC"):
            raise errors.AccOnly("misbehaviorJudge only accepts messages from an ACC")
        history = self.records.setdefault(subject, [])
        record = JudgeRecord(obj, misbehavior, time)
        history.append(record)
        record.penalty, record.capped = self.judge(history)
        return record.penalty

    @abi("deleteJC")
    def delete_jc(self, ctx: Context) -> None:
        if ctx.caller != self.creator:
            raise errors.PermissionDenied("only the JC creator may delete it")
        ctx.world.selfdestruct(self.address, ctx.caller)

    @abi("getRecords", Address, mutating=False)
    def get_records(self, ctx: Context, subject: Address) -> list[JudgeRecord]:
        return copy.deepcopy(self.records.get(subject, []))
