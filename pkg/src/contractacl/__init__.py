"""Smart-contract access control for IoT peers on a simulated proof-of-work ledger."""
from .acc import AccessControlContract, MisbehaviorEntry, Policy, ResourceState
from .chain import Block, ChainConfig, Genesis, NodeState, block_hash, load_snapshot, save_snapshot, verify_snapshot
from .codec import Address
from .jc import JudgeContract, JudgeRecord, penalty_seconds
from .peers import AccessOutcome, Framework, Monitor, Network, Peer, PolicySpec, Role, Topology
from .rc import MethodEntry, RegisterContract
from .runtime import Event, Message, Receipt, Transaction, World
from .scenario import bundled_scenario, run_scenario

__all__ = [
    "AccessControlContract",
    "AccessOutcome",
    "Address",
    "Block",
    "ChainConfig",
    "Event",
    "Framework",
    "Genesis",
    "JudgeContract",
    "JudgeRecord",
    "Message",
    "MethodEntry",
    "MisbehaviorEntry",
    "Monitor",
    "Network",
    "NodeState",
    "Peer",
    "Policy",
    "PolicySpec",
    "Receipt",
    "RegisterContract",
    "ResourceState",
    "Role",
    "Topology",
    "Transaction",
    "World",
    "block_hash",
    "bundled_scenario",
    "load_snapshot",
    "penalty_seconds",
    "run_scenario",
    "save_snapshot",
    "verify_snapshot",
]
