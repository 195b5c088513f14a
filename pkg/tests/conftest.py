import pytest

from contractacl.peers import Framework, Network, PolicySpec, Topology
from contractacl.runtime import Transaction, World

CASESTUDY_TOPOLOGY = {
    "schemaVersion": 1,
    "seed": 2018,
    "peers": [
        {"id": "desktop", "role": "userDevice", "miner": True},
        {"id": "laptop", "role": "userDevice", "miner": True},
        {"id": "piSubject", "role": "gateway"},
        {"id": "piObject", "role": "gateway"},
        {"id": "sensorB", "role": "iotDevice", "agent": "piObject"},
        {"id": "serverA", "role": "server"},
    ],
}


class Harness:
    """A bare world with a handful of accounts; transactions applied directly."""

    def __init__(self, seed=1, accounts=6):
        self.world = World(seed)
        self.accounts = [self.world.create_account() for _ in range(accounts)]
        self.nonce = 0
        self.height = 1
        self.block_time = 0

    @property
    def creator(self):
        return self.accounts[0]

    @property
    def subject(self):
        return self.accounts[1]

    @property
    def others(self):
        return self.accounts[2:]

    def tx(self, sender, target, abi_name, *args, time=0):
        self.nonce += 1
        return Transaction.create(sender, target, abi_name, args, time, self.nonce)

    def send(self, sender, target, abi_name, *args):
        receipt = self.world.apply_transaction(self.tx(sender, target, abi_name, *args), self.height, self.block_time)
        self.height += 1
        return receipt

    def deploy(self, sender, kind, *args):
        receipt = self.send(sender, None, kind, *args)
        assert receipt.ok, receipt
        return receipt.return_values[0]

    def setup_acc(self, base=2, interval=3, unit=60, policies=(("file A", "read", "allow", 100, 2),), strict=False, cap=None):
        jc_args = (base, interval, unit) if cap is None else (base, interval, unit, cap)
        self.jc = self.deploy(self.accounts[-1], "JC", *jc_args)
        self.acc = self.deploy(self.creator, "ACC", self.subject, self.creator, strict)
        assert self.send(self.creator, self.acc, "setJC", self.jc).ok
        for policy in policies:
            assert self.send(self.creator, self.acc, "policyAdd", *policy).ok
        return self.acc

    def request(self, resource, action, time, caller=None):
        return self.send(caller or self.subject, self.acc, "accessControl", resource, action, time)

    def policy(self, resource="file A", action="read"):
        (p,) = self.world.call(self.creator, self.acc, "getPolicy", (resource, action))
        return p

    def resource(self, resource="file A"):
        (r,) = self.world.call(self.creator, self.acc, "getResource", (resource,))
        return r


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion; printed in the summary."""

    def report(number, title, passed, detail):
        line = f"AC{number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[0][2:])):
            terminalreporter.write_line(line)


@pytest.fixture
def harness():
    return Harness()


@pytest.fixture
def acc_harness():
    h = Harness()
    h.setup_acc()
    return h


@pytest.fixture
def topology():
    return Topology.from_dict(CASESTUDY_TOPOLOGY)


def make_framework(topology, difficulty=4):
    net = Network(topology, difficulty=difficulty)
    fw = Framework(net)
    fw.deploy_register("desktop", 1)
    fw.deploy_judge("desktop", 2, 3, 60, 2)
    return fw


@pytest.fixture
def framework(topology):
    return make_framework(topology)


@pytest.fixture
def method1(framework):
    framework.register_access_control_method(
        "piObject", "piSubject", "sensorB", "Method 1", [PolicySpec("file A", "read", "allow", 100, 2)], 3
    )
    return framework
