"""Access Control Contract: one subject-object pair, policy list, misbehavior ledger."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from . import errors
from .codec import Address
from .runtime import Context, Contract, abi

ALLOW = "allow"
DENY = "deny"
PERMISSIONS = (ALLOW, DENY)

# policyUpdate sentinels meaning "leave this field alone"
KEEP_PERMISSION = ""
KEEP_INT = -1

ACC_ABIS = ("policyAdd", "policyUpdate", "policyDelete", "accessControl", "setJC", "deleteACC")


@dataclass
class Policy:
    resource: str
    action: str
    permission: str
    min_interval: int
    threshold: int
    to_lr: int = 0
    no_fr: int = 0

    def state_tree(self) -> list:
        return [self.resource, self.action, self.permission, self.min_interval, self.threshold, self.to_lr, self.no_fr]


@dataclass
class MisbehaviorEntry:
    misbehavior: str
    time: int
    penalty: int


@dataclass
class ResourceState:
    resource: str
    time_of_unblock: int = 0
    misbehaviors: list[MisbehaviorEntry] = field(default_factory=list)

    def state_tree(self) -> list:
        return [self.resource, self.time_of_unblock, [[m.misbehavior, m.time, m.penalty] for m in self.misbehaviors]]


def describe_misbehavior(resource: str, action: str, no_fr: int) -> str:
    return f"frequent-request resource={resource} action={action} noFR={no_fr}"


def _check_policy_fields(permission: str, min_interval: int, threshold: int) -> None:
    if permission not in PERMISSIONS:
        raise errors.MalformedArgs(f"permission must be one of {PERMISSIONS}")
    if min_interval < 0:
        raise errors.MalformedArgs("minInterval must be non-negative")
    if threshold < 1:
        raise errors.MalformedArgs("threshold must be positive")


class AccessControlContract(Contract):
    """Static (permission) and dynamic (request frequency) validation for one subject.

    Deployed by the object with init arguments ``(subject, object, strictTime)``.
    With ``strictTime`` the block timestamp replaces the caller's time argument.
    """

    kind = "ACC"
    init_signature = (Address, Address, bool)

    def __init__(self, address: Address, creator: Address, subject: Address, obj: Address, strict_time: bool = False):
        super().__init__(address, creator)
        self.subject = subject
        self.object = obj
        self.strict_time = strict_time
        self.jc: Optional[Address] = None
        self.policies: dict[tuple[str, str], Policy] = {}
        self.resources: dict[str, ResourceState] = {}

    def state_tree(self) -> list:
        return [
            self.subject,
            self.object,
            self.strict_time,
            self.jc,
            {key: p.state_tree() for key, p in self.policies.items()},
            {name: r.state_tree() for name, r in self.resources.items()},
        ]

    def _require_creator(self, ctx: Context) -> None:
        if ctx.caller != self.creator:
            raise errors.PermissionDenied("only the ACC creator may do this")

    def _policy(self, resource: str, action: str) -> Policy:
        try:
            return self.policies[(resource, action)]
        except KeyError:
            raise errors.NoSuchPolicy(f"({resource}, {action})") from None

    @abi("policyAdd", str, str, str, int, int)
    def policy_add(self, ctx: Context, resource: str, action: str, permission: str, min_interval: int, threshold: int) -> None:
        self._require_creator(ctx)
        if (resource, action) in self.policies:
            raise errors.DuplicatePolicy(f"({resource}, {action})")
        _check_policy_fields(permission, min_interval, threshold)
        self.policies[(resource, action)] = Policy(resource, action, permission, min_interval, threshold)
        self.resources.setdefault(resource, ResourceState(resource))

    @abi("policyUpdate", str, str, str, int, int)
    def policy_update(self, ctx: Context, resource: str, action: str, permission: str, min_interval: int, threshold: int) -> None:
        """Replace the given fields; ``""`` / ``-1`` keep the current value."""
        self._require_creator(ctx)
        policy = self._policy(resource, action)
        new_permission = policy.permission if permission == KEEP_PERMISSION else permission
        new_interval = policy.min_interval if min_interval == KEEP_INT else min_interval
        new_threshold = policy.threshold if threshold == KEEP_INT else threshold
        _check_policy_fields(new_permission, new_interval, new_threshold)
        policy.permission = new_permission
        policy.min_interval = new_interval
        policy.threshold = new_threshold

    @abi("policyDelete", str, str)
    def policy_delete(self, ctx: Context, resource: str, action: str) -> None:
        self._require_creator(ctx)
        self._policy(resource, action)
        del self.policies[(resource, action)]

    @abi("setJC", Address)
    def set_jc(self, ctx: Context, jc_address: Address) -> None:
        self._require_creator(ctx)
        if not ctx.world.is_alive(jc_address, "JC"):
            raise errors.NotAJudge(str(jc_address))
        self.jc = jc_address

    @abi("deleteACC")
    def delete_acc(self, ctx: Context) -> None:
        self._require_creator(ctx)
        ctx.world.selfdestruct(self.address, ctx.caller)

    @abi("getPolicy", str, str, mutating=False)
    def get_policy(self, ctx: Context, resource: str, action: str) -> Policy:
        return copy.copy(self._policy(resource, action))

    @abi("getResource", str, mutating=False)
    def get_resource(self, ctx: Context, resource: str) -> ResourceState:
        try:
            return copy.deepcopy(self.resources[resource])
        except KeyError:
            raise errors.NoSuchPolicy(f"no policy on resource {resource}") from None

    @abi("accessControl", str, str, int)
    def access_control(self, ctx: Context, resource: str, action: str, time: int) -> tuple[bool, int]:
        # The object may forward the subject's request; both count as the subject's.
        if ctx.caller not in (self.subject, self.object):
            raise errors.UnauthorizedCaller(str(ctx.caller))
        if self.jc is None:
            raise errors.JudgeUnset("setJC has not been called")
        if self.strict_time:
            time = ctx.block_time
        if time < 0:
            raise errors.MalformedArgs("time must be non-negative")

        policy_check, behavior_check, penalty = False, True, 0
        policy = self.policies.get((resource, action))
        if policy is not None:
            res = self.resources[resource]
            if res.time_of_unblock <= time:
                if res.time_of_unblock > 0:
                    policy.no_fr, policy.to_lr, res.time_of_unblock = 0, 0, 0
                policy_check = policy.permission == ALLOW
                if time - policy.to_lr <= policy.min_interval:
                    policy.no_fr += 1
                    if policy.no_fr >= policy.threshold:
                        behavior_check = False
                        msb = describe_misbehavior(resource, action, policy.no_fr)
                        (penalty,) = ctx.send(self.jc, "misbehaviorJudge", self.subject, self.object, msb, time)
                        res.time_of_unblock = time + penalty
                        res.misbehaviors.append(MisbehaviorEntry(msb, time, penalty))
                else:
                    policy.no_fr = 0
            # outside the unblock guard: updated even while blocked
            policy.to_lr = time

        result = policy_check and behavior_check
        ctx.emit("returnResult", result, penalty)
        return result, penalty
