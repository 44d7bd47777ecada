"""A node's local database: inserts, range queries, aggregation, change events.

Run: python demos/01_local_store.py
"""

from syncmesh.model import SensorReading, TimeRange
from syncmesh.store import LocalStore

store = LocalStore("node-00")

# The change stream fires once per accepted insert, in sequence order.
events = []
store.register_listener(lambda ev: events.append(ev))

for hour in range(24):
    store.insert(SensorReading(
        node_id="node-00", sensor_id="sensor-000", timestamp=(hour + 1) * 3_600_000,
        lat=42.69, lon=23.32, p1=12.0 + hour, p2=6.0 + hour / 2,
        temperature=15.0 + hour / 3, humidity=55.0, pressure=101_300.0))

print(f"stored {len(store)} readings, saw {len(events)} change events")

# Duplicate inserts are idempotent: same key, no event.
dup = store.insert(store.all_readings()[0])
print(f"duplicate insert -> {dup!r}, still {len(store)} readings, "
      f"{len(events)} events")

# Half-open range query [6h, 12h): readings at hours 6..11.
morning = store.query(TimeRange(6 * 3_600_000, 12 * 3_600_000))
print(f"morning window holds {len(morning)} readings, "
      f"first at t={morning[0].timestamp}")

# Aggregates carry (count, sum, min, max); mean derives from sum/count.
summary = store.aggregate(TimeRange(1, 10**15), ("temperature", "p1"))
for name, agg in summary.fields:
    print(f"{name}: count={agg.count} mean={agg.mean:.2f} "
          f"min={agg.min:.2f} max={agg.max:.2f}")
