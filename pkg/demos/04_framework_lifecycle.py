"""Register, use, update and delete an access-control method through peers.

The object-side gateway signs every transaction for its sensor. A monitor on
the sensor's side sees the same outcomes the subject receives.
"""
from contractacl import Framework, Network, PolicySpec, Topology

topology = Topology.from_dict({
    "schemaVersion": 1,
    "seed": 42,
    "peers": [
        {"id": "desktop", "role": "userDevice", "miner": True},
        {"id": "piSubject", "role": "gateway"},
        {"id": "piObject", "role": "gateway"},
        {"id": "sensorB", "role": "iotDevice", "agent": "piObject"},
    ],
})
fw = Framework(Network(topology, difficulty=8))
fw.deploy_register("desktop", time=1)
fw.deploy_judge("desktop", base=2, interval=3, time=2)

fw.register_access_control_method("piObject", "piSubject", "sensorB", "Method 1",
                                  [PolicySpec("file A", "read", "allow", 100, 2)], time=3)
address, abis = fw.get_contract("piSubject", "Method 1")
print("Method 1 ->", address, abis)

monitor = fw.monitor_access("sensorB", "Method 1", on_outcome=lambda o: print("  sensor notified:", o.result, o.penalty))
for t in (1000, 1010, 1020):
    outcome = fw.request_access("piSubject", "Method 1", "file A", "read", t)
    print(f"subject at {t}: result={outcome.result} penalty={outcome.penalty}")
    monitor.poll()

new_address = fw.update_access_control_method("piObject", "Method 1", [PolicySpec("file A", "read", "allow", 10, 5)], time=1100)
print("updated Method 1 ->", new_address)
print("fresh ACC lets the subject in:", fw.request_access("piSubject", "Method 1", "file A", "read", 1110).result)

fw.delete_access_control_method("piObject", "Method 1", time=1200)
print("agency violations:", fw.network.agency_violations())
