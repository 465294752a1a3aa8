"""Child process for crash-recovery tests.

Usage: crash_child.py STORE N TORN_BYTES

Persists N alarms (acknowledging each on stdout), then appends the first
TORN_BYTES of one more record without a newline and waits to be killed.
"""
import json
import sys
import time
from datetime import datetime, timezone

from skypesiem.siem import Alarm, EventStore, RiskParams


def alarm(i):
    return Alarm(501, "Skype attach", 1.8, RiskParams(3, 5, 3), [i], datetime(2017, 1, 16, tzinfo=timezone.utc),
                 "192.168.1.200")


def main():
    path, n, torn = sys.argv[1], int(sys.argv[2]), int(sys.argv[3])
    store = EventStore(path)
    for i in range(n):
        store.persist(alarm(i))
        print(i + 1, flush=True)
    line = json.dumps(alarm(n).to_dict()).encode()
    with open(path, "ab") as fh:
        fh.write(line[:torn])
        fh.flush()
    print("torn", flush=True)
    time.sleep(60)


if __name__ == "__main__":
    main()
