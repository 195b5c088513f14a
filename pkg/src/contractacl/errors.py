"""Exception hierarchy.

Contract-level failures subclass :class:`ContractError` and carry a short
``code``; the block executor turns them into receipt statuses instead of
letting them escape.
"""
from __future__ import annotations


class ContractError(Exception):
    code = "contract-error"


class PermissionDenied(ContractError):
    code = "permission-denied"


class UnauthorizedCaller(ContractError):
    code = "unauthorized-caller"


class ContractDestroyed(ContractError):
    code = "contract-destroyed"


class NoSuchContract(ContractError):
    code = "no-such-contract"


class NoSuchAbi(ContractError):
    code = "no-such-abi"


class UnknownKind(ContractError):
    code = "unknown-kind"


class MalformedArgs(ContractError):
    code = "malformed-args"


class MalformedTransaction(ContractError):
    code = "malformed-transaction"


class UnknownSender(ContractError):
    code = "unknown-sender"


class CallDepthExceeded(ContractError):
    code = "call-depth-exceeded"


class DuplicatePolicy(ContractError):
    code = "duplicate-policy"


class NoSuchPolicy(ContractError):
    code = "no-such-policy"


class NotAJudge(ContractError):
    code = "not-a-jc"


class JudgeUnset(ContractError):
    code = "jc-unset"


class AccOnly(ContractError):
    code = "acc-only"


class DuplicateName(ContractError):
    code = "duplicate-name"


class CreatorMismatch(ContractError):
    code = "creator-mismatch"


class DanglingAddress(ContractError):
    code = "dangling-address"


class NoSuchMethod(ContractError):
    code = "no-such-method"


class ChainError(Exception):
    pass


class MiningExhausted(ChainError):
    """No satisfying nonce within the budget, or nothing to mine."""


class BlockRejected(ChainError):
    def __init__(self, check: str, detail: str = ""):
        super().__init__(f"{check}: {detail}" if detail else check)
        self.check = check


class PeerError(Exception):
    pass


class AgencyViolation(PeerError):
    pass


class PendingTimeout(PeerError):
    pass


class StepFailed(PeerError):
    """A multi-transaction framework procedure stopped at ``step``."""

    def __init__(self, procedure: str, step: int, status: str, detail: str = ""):
        super().__init__(f"{procedure} step {step} failed: {status} {detail}".rstrip())
        self.procedure = procedure
        self.step = step
        self.status = status


class RequestFailed(PeerError):
    def __init__(self, receipt):
        super().__init__(f"accessControl transaction failed: {receipt.status} {receipt.error}".rstrip())
        self.receipt = receipt


class ScenarioError(Exception):
    pass
