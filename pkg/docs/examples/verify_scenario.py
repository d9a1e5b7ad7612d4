"""
Verifying a scenario file
=========================

Scenario files describe the tree, the driver and the contract in JSON. The
same checks are available from the shell as ``treerbsde verify FILE``.
"""

from treerbsde import reports
from treerbsde.scenario import bundled

sc = bundled("put_d4_funding_flows")
doc = reports.verify(sc, "fast")
for check in doc["checks"]:
    print(f"{check['name']:40s} {'ok' if check['pass'] else 'FAILED'}")
print(doc["summary"])
