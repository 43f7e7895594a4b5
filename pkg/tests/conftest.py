import pytest

from gridssq.domain import HostSpec, NetworkInventory, ServiceSpec


def make_inventory(spec):
    """spec: list of (hi, degradation, [si, ...]) -> inventory with ids h0.., s0.."""
    hosts = []
    for k, (hi, deg, sis) in enumerate(spec):
        services = tuple(ServiceSpec(f"s{j}", si) for j, si in enumerate(sis))
        hosts.append(HostSpec(f"h{k}", hi, deg, services))
    return NetworkInventory(tuple(hosts))


@pytest.fixture
def tiny_inventory():
    return make_inventory([(1.0, 0.0, [1.0])])


@pytest.fixture
def two_host_inventory():
    return make_inventory([(1.0, 0.0, [1.0]), (3.0, 0.0, [1.0])])
