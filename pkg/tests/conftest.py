import os
import sys

import pytest

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))
SERVERS_DIR = os.path.join(TESTS_DIR, "fixture_servers")

sys.path.insert(0, TESTS_DIR)


@pytest.fixture(scope="session")
def stdio_server_path() -> str:
    return os.path.join(SERVERS_DIR, "stdio_server.py")


@pytest.fixture(scope="session")
def http_server_path() -> str:
    return os.path.join(SERVERS_DIR, "http_server.py")
