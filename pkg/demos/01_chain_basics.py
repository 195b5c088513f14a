"""Mine, replicate and tamper with a tiny proof-of-work chain.

Two replicas start from the same genesis. One mines a block that deploys a
Register Contract; the other validates it by re-execution and accepts it.
A copy of the block with one flipped byte is then rejected.
"""
import dataclasses

from contractacl import ChainConfig, Genesis, NodeState, Transaction

genesis = Genesis.with_new_accounts(seed=1, count=2)
alice, bob = genesis.accounts
config = ChainConfig(difficulty=12)

miner = NodeState(genesis, config)
follower = NodeState(genesis, config)

tx = Transaction.create(alice, None, "RC", (), 0, nonce=0)
miner.submit(tx)
block = miner.mine_block(alice, timestamp=1)
print(f"mined block {block.height} with nonce {block.nonce}; hash {block.hash.hex()[:16]}...")

miner.accept_block(block)
print("follower validates:", follower.validate_block(block))
follower.accept_block(block)
print("state roots agree:", miner.state_root == follower.state_root)
print("deployment receipt:", follower.receipt(tx.tx_id).status, follower.receipt(tx.tx_id).return_values[0])

# changing any header field breaks the proof-of-work seal
forged = dataclasses.replace(block, state_root=bytes(32))
fresh = NodeState(genesis, config)
print("forged block check:", fresh.check_block(forged)[0])

data = bytearray(block.encode())
data[len(data) // 2] ^= 0x01
print("bit-flipped block valid:", fresh.validate_encoded(bytes(data)))
