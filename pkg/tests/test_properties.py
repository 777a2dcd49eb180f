import pytest

import properties


@pytest.mark.parametrize("name", sorted(properties.SUITES))
def test_property_suite(name):
    properties.SUITES[name]()
