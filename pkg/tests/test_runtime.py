import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contractacl import errors
from contractacl.runtime import MAX_CALL_DEPTH, Contract, Transaction, World, abi
from conftest import Harness


class Recursor(Contract):
    """Calls itself by message ``remaining`` more times."""

    kind = "TEST-RECURSOR"

    def __init__(self, address, creator):
        super().__init__(address, creator)
        self.calls = 0

    def state_tree(self):
        return [self.calls]

    @abi("recurse", int)
    def recurse(self, ctx, remaining):
        self.calls += 1
        if remaining > 0:
            ctx.send(ctx.this, "recurse", remaining - 1)
        return ctx.depth


# -- accounts -----------------------------------------------------------------


def test_create_account_unique():
    w = World(3)
    assert w.create_account() != w.create_account()


def test_create_account_deterministic_per_seed():
    a, b = World(9), World(9)
    assert [a.create_account() for _ in range(3)] == [b.create_account() for _ in range(3)]
    assert World(10).create_account() != World(9).create_account()


def test_new_account_can_send(harness):
    fresh = harness.world.create_account()
    assert harness.send(fresh, None, "RC").ok


# -- deployment ------------------------------------------------------------------


def test_deploy_jc_holds_parameters(harness):
    jc = harness.deploy(harness.creator, "JC", 2, 3, 60)
    state = harness.world.contracts[jc].contract
    assert (state.base, state.interval, state.penalty_unit) == (2, 3, 60)


def test_deploy_by_unregistered_sender(harness):
    stranger = World(99).create_account()
    receipt = harness.world.apply_transaction(Transaction.create(stranger, None, "RC"))
    assert receipt.status == "unknown-sender"
    with pytest.raises(errors.UnknownSender):
        harness.world.deploy_contract(stranger, "RC")


def test_two_deployments_distinct(harness):
    assert harness.deploy(harness.creator, "RC") != harness.deploy(harness.creator, "RC")


def test_deploy_unknown_kind_and_bad_args(harness):
    assert harness.send(harness.creator, None, "NOPE").status == "unknown-kind"
    assert harness.send(harness.creator, None, "JC", 2, 3).status == "malformed-args"
    assert harness.send(harness.creator, None, "JC", 0, 3, 60).status == "malformed-args"


def test_deployment_takes_effect_through_transaction(harness):
    before = harness.world.digest()
    tx = harness.tx(harness.creator, None, "RC")
    assert harness.world.digest() == before
    harness.world.apply_transaction(tx)
    assert harness.world.digest() != before


# -- transactions ---------------------------------------------------------------


def test_access_control_receipt_has_return_result(acc_harness):
    receipt = acc_harness.request("file A", "read", 1000)
    assert receipt.ok
    assert [e.name for e in receipt.events] == ["returnResult"]
    assert receipt.events[0].payload == (True, 0)
    assert receipt.events[0].emitter == acc_harness.acc


def test_destroyed_contract_rejects(acc_harness):
    assert acc_harness.send(acc_harness.creator, acc_harness.acc, "deleteACC").ok
    assert acc_harness.request("file A", "read", 1000).status == "contract-destroyed"


def test_unknown_abi(acc_harness):
    assert acc_harness.send(acc_harness.creator, acc_harness.acc, "fly").status == "no-such-abi"


def test_conflicting_updates_apply_in_order(acc_harness):
    h = acc_harness
    world = h.world
    first = h.tx(h.creator, h.acc, "policyUpdate", "file A", "read", "deny", 10, -1)
    second = h.tx(h.creator, h.acc, "policyUpdate", "file A", "read", "allow", 20, 5)
    for tx in (first, second):
        assert world.apply_transaction(tx).ok
    p = h.policy()
    assert (p.permission, p.min_interval, p.threshold) == ("allow", 20, 5)


def test_malformed_transaction_rejected(harness):
    tx = harness.tx(harness.creator, None, "RC")
    forged = Transaction(tx.sender, tx.target, "JC", tx.args, tx.supplied_time, tx.nonce, tx.tx_id)
    assert not forged.is_well_formed()
    assert harness.world.apply_transaction(forged).status == "malformed-transaction"


# -- messages ----------------------------------------------------------------------


def test_message_returns_penalty_within_transaction(acc_harness):
    h = acc_harness
    h.request("file A", "read", 1000)
    h.request("file A", "read", 1010)
    receipt = h.request("file A", "read", 1020)
    assert receipt.return_values == (False, 60)
    assert len(h.world.call(h.creator, h.jc, "getRecords", (h.subject,))[0]) == 1


def test_message_to_destroyed_jc_aborts(acc_harness):
    h = acc_harness
    assert h.send(h.accounts[-1], h.jc, "deleteJC").ok
    h.request("file A", "read", 1000)
    h.request("file A", "read", 1010)
    before = h.world.digest()
    receipt = h.request("file A", "read", 1020)
    assert receipt.status == "contract-destroyed"
    assert receipt.events == ()
    assert h.world.digest() == before


def test_call_depth_limit(harness):
    rec = harness.deploy(harness.creator, "TEST-RECURSOR")
    ok = harness.send(harness.creator, rec, "recurse", MAX_CALL_DEPTH)
    assert ok.ok and ok.return_values == (0,)
    assert harness.world.contracts[rec].contract.calls == MAX_CALL_DEPTH + 1
    before = harness.world.digest()
    too_deep = harness.send(harness.creator, rec, "recurse", MAX_CALL_DEPTH + 1)
    assert too_deep.status == "call-depth-exceeded"
    assert harness.world.digest() == before


# -- read-only calls -------------------------------------------------------------


def test_read_only_call_leaves_digest(harness):
    rc = harness.deploy(harness.creator, "RC")
    acc = harness.deploy(harness.creator, "ACC", harness.subject, harness.creator, False)
    assert harness.send(harness.creator, rc, "methodRegister", "M", harness.subject, harness.creator, "ACC 1",
                        harness.creator, acc, "accessControl").ok
    before = harness.world.digest()
    assert harness.world.call(harness.subject, rc, "getContract", ("M",))[0] == acc
    assert harness.world.digest() == before


def test_read_only_call_discards_mutation(acc_harness):
    h = acc_harness
    before = h.world.digest()
    h.world.call(h.creator, h.acc, "policyAdd", ("file B", "write", "deny", 5, 1))
    assert h.world.digest() == before
    with pytest.raises(errors.NoSuchPolicy):
        h.world.call(h.creator, h.acc, "getPolicy", ("file B", "write"))


def test_read_only_policy_row_verbatim(acc_harness):
    p = acc_harness.policy()
    assert (p.resource, p.action, p.permission, p.min_interval, p.threshold, p.to_lr, p.no_fr) == (
        "file A", "read", "allow", 100, 2, 0, 0)


def test_read_only_unknown_abi(acc_harness):
    with pytest.raises(errors.NoSuchAbi):
        acc_harness.world.call(acc_harness.creator, acc_harness.acc, "nothing", ())


# -- selfdestruct ----------------------------------------------------------------


def test_selfdestruct_by_creator(acc_harness):
    h = acc_harness
    h.world.selfdestruct(h.acc, h.creator)
    record = h.world.contracts[h.acc]
    assert not record.alive and record.contract is None
    assert h.request("file A", "read", 1000).status == "contract-destroyed"


def test_selfdestruct_by_other_denied(acc_harness):
    h = acc_harness
    with pytest.raises(errors.PermissionDenied):
        h.world.selfdestruct(h.acc, h.subject)
    assert h.world.is_alive(h.acc)


def test_redeploy_after_destroy_new_address(acc_harness):
    h = acc_harness
    h.world.selfdestruct(h.acc, h.creator)
    again = h.deploy(h.creator, "ACC", h.subject, h.creator, False)
    assert again != h.acc


# -- properties --------------------------------------------------------------------

ops = st.lists(
    st.tuples(
        st.sampled_from(["policyAdd", "policyUpdate", "policyDelete", "accessControl", "setJC", "deleteACC", "bogus"]),
        st.integers(0, 3),
        st.sampled_from(["file A", "file B"]),
        st.integers(0, 3000),
    ),
    max_size=25,
)


def _op_args(h, name, resource, t):
    if name == "policyAdd":
        return (resource, "read", "allow" if t % 2 else "deny", t % 150, 1 + t % 3)
    if name == "policyUpdate":
        return (resource, "read", "", t % 150, -1)
    if name == "policyDelete":
        return (resource, "read")
    if name == "accessControl":
        return (resource, "read", t)
    if name == "setJC":
        return (h.jc if t % 2 else h.acc,)
    return ()


@settings(max_examples=60, deadline=None)
@given(ops)
def test_failed_transactions_leave_digest_unchanged(sequence):
    h = Harness()
    h.setup_acc()
    for name, who, resource, t in sequence:
        before = h.world.digest()
        receipt = h.send(h.accounts[who], h.acc, name, *_op_args(h, name, resource, t))
        if not receipt.ok:
            assert h.world.digest() == before
            assert receipt.events == ()


@settings(max_examples=30, deadline=None)
@given(ops)
def test_execution_is_deterministic(sequence):
    digests = []
    for _ in range(2):
        h = Harness()
        h.setup_acc()
        receipts = [h.send(h.accounts[w], h.acc, n, *_op_args(h, n, r, t)) for n, w, r, t in sequence]
        digests.append((h.world.digest(), receipts))
    assert digests[0] == digests[1]


@settings(max_examples=30, deadline=None)
@given(ops)
def test_dead_contract_never_executes(sequence):
    h = Harness()
    h.setup_acc()
    h.world.selfdestruct(h.acc, h.creator)
    for name, who, resource, t in sequence:
        receipt = h.send(h.accounts[who], h.acc, name, *_op_args(h, name, resource, t))
        assert receipt.status == "contract-destroyed"
