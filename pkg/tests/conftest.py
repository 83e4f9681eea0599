import threading

import numpy as np
import pytest

from splitfss.ring import FixedConfig
from splitfss.transport import PhaseCounters, make_channel_pair


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture
def cfg8():
    return FixedConfig(bit_width=8, frac_bits=2)


@pytest.fixture
def cfg16():
    return FixedConfig(bit_width=16, frac_bits=4)


@pytest.fixture
def cfg32():
    return FixedConfig(bit_width=32, frac_bits=13)


@pytest.fixture
def cfg64():
    return FixedConfig()


def run_pair(fn0, fn1, phase: int = 2):
    """Run two party closures fn(party, channel) concurrently over an
    in-process channel pair; returns (result0, result1)."""
    c0 = PhaseCounters("p0")
    c1 = PhaseCounters("p1")
    ch0, ch1 = make_channel_pair("p0", "p1", c0, c1)
    ch0.set_context(1, 0, 0, phase)
    ch1.set_context(1, 0, 0, phase)
    results = [None, None]
    errors = [None, None]

    def wrap(i, fn, ch):
        try:
            results[i] = fn(i, ch)
        except BaseException as exc:  # noqa: BLE001
            errors[i] = exc

    t = threading.Thread(target=wrap, args=(1, fn1, ch1))
    t.start()
    wrap(0, fn0, ch0)
    t.join(timeout=60)
    for err in errors:
        if err is not None:
            raise err
    return results[0], results[1], (ch0, ch1)
