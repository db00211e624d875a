import os

import pytest

RUN_SLOW = os.getenv("RUN_SLOW", "false").lower() in {"1", "true", "yes", "y"}


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason="set RUN_SLOW=1 to run desk-scale checks")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
