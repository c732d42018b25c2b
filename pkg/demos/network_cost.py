"""Where the money goes: link, NIC and switch cost per dimension.

Starts with three NPUs on one switch at 10 GB/s each, then prices the
bundled 1,024-NPU topologies at an even 300 GB/s split. Only switch
dimensions pay for NICs and switch ports, which is why moving bandwidth off
the outermost dimension makes a network cheaper.
"""

from hiernet import equal_bw, load_config, network_cost, parse_topology


def show(t, bws):
    c = network_cost(t, bws)
    print(f"{t.name} at {', '.join(f'{b:g}' for b in bws)} GB/s per NPU")
    for k, (block, d) in enumerate(zip(t.dims, c.per_dim), start=1):
        print(f"  Dim {k} {block.name:12} links ${d.link_cost:>12,.0f}  NICs ${d.nic_cost:>12,.0f}  "
              f"switches ${d.switch_cost:>12,.0f}")
    print(f"  total ${c.total:,.0f}\n")


def main():
    show(parse_topology("Switch(3)"), [10.0])
    for t in load_config().topologies:
        show(t, equal_bw(300.0, len(t)).per_dim)


if __name__ == "__main__":
    main()
