import io

import pytest

from poolsim.config import parse_config


def quiet_parse(data):
    """parse_config with the supply-shortfall warning swallowed."""
    return parse_config(data, warn_stream=io.StringIO())


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "out"
    out.mkdir()
    return str(out)
