"""Tree versus mesh winner-takes-all arbitration on a few arrival patterns.

Shows grant latency, cell count and metastable resolutions for both
topologies, including near-simultaneous arrivals inside the metastability
window.

    python demos/arbitration_compare.py
"""

from tdtm.arbitration import MESH, TBA, MutexModel, arbiter_cost, mesh_arbitrate, tba_arbitrate

PATTERNS = {
    "well separated": [400, 250, 310, 520],
    "two-way tie": [300, 300, 450, 500],
    "crowded window": [200, 203, 201, 204, 260, 330, 205, 290],
}


def main():
    mutex = MutexModel()
    print(f"mutex: d_mutex={mutex.d_mutex} ps, metastability window {mutex.delta_meta} ps")
    for label, arrivals in PATTERNS.items():
        print(f"\n{label}: arrivals {arrivals}")
        for name, fn in ((TBA, tba_arbitrate), (MESH, mesh_arbitrate)):
            r = fn(arrivals, mutex)
            cells = arbiter_cost(name, len(arrivals)).cells
            print(f"  {name:<4} winner={r.winner} grant at {r.grant_time} ps, "
                  f"{cells} cells, {r.meta_events} metastable resolutions")


if __name__ == "__main__":
    main()
