"""How intermediate dimensions shrink the traffic that must leave through NICs.

The same 1,024 NPUs arranged as 2D, 3D and 4D networks: every extra inner
dimension reduces the data before it reaches the outermost (switch)
dimension. The multiplier column is how many NICs per NPU a flatter network
needs to match the 4D network's last-dimension time.
"""

from hiernet.explorer import load_config, nic_traffic_table


def main():
    rows = nic_traffic_table(load_config())
    print(f"{'workload':16} {'topology':34} {'last-dim GB':>12} {'NICs/NPU':>9}")
    for r in rows:
        print(f"{r.workload:16} {r.topology:34} {r.last_dim_bytes / 1e9:12.2f} {r.nics_per_npu:9.2f}")


if __name__ == "__main__":
    main()
