"""Walk through the access-control rule on a bare world.

An object deploys an ACC for one subject, points it at a judge contract and
adds an allow policy with minInterval=100 s and threshold=2. The subject then
requests too often, gets blocked, and is let back in after the penalty.
"""
from contractacl import Transaction, World

world = World(seed=7)
obj, subject, judge_owner = (world.create_account() for _ in range(3))
nonce = iter(range(1000))


def send(sender, target, abi_name, *args):
    receipt = world.apply_transaction(Transaction.create(sender, target, abi_name, args, 0, next(nonce)))
    if not receipt.ok:
        print(f"  {abi_name} -> {receipt.status}: {receipt.error}")
    return receipt


jc = send(judge_owner, None, "JC", 2, 3, 60).return_values[0]
acc = send(obj, None, "ACC", subject, obj, False).return_values[0]
send(obj, acc, "setJC", jc)
send(obj, acc, "policyAdd", "file A", "read", "allow", 100, 2)

print("time  result penalty  noFR toLR  timeOfUnblock")
for t in (1000, 1050, 1080, 1100, 1200):
    result, penalty = send(subject, acc, "accessControl", "file A", "read", t).return_values
    (policy,) = world.call(obj, acc, "getPolicy", ("file A", "read"))
    (resource,) = world.call(obj, acc, "getResource", ("file A",))
    print(f"{t:5d}  {str(result):6s} {penalty:7d}  {policy.no_fr:4d} {policy.to_lr:5d} {resource.time_of_unblock:6d}")

print("\nmisbehavior ledger on file A:")
for entry in resource.misbehaviors:
    print(f"  {entry.time}: {entry.misbehavior} -> {entry.penalty}s")

print("\nthe subject cannot change policies:")
send(subject, acc, "policyUpdate", "file A", "read", "allow", 0, 99)
