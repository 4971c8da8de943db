import pytest

from realloc_nas.arch import BackboneFamily, get_family

ACCEPTANCE_LINES = []


def toy_family(num_stages):
    """Uniform family with no fixed blocks, for small operation spaces."""
    return BackboneFamily(f"toy{num_stages}", num_stages, "basic", (1,) * num_stages)


@pytest.fixture
def resnet50():
    return get_family("resnet_bottleneck")


@pytest.fixture
def resnet18():
    return get_family("resnet_basic")


@pytest.fixture
def mv2():
    return get_family("mobilenetv2")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
