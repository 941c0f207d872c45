import numpy as np
import pytest

from coldcavity.trace import Trace


def test_time_base_and_window():
    tr = Trace(1.0, 0.5, np.arange(10.0))
    assert tr.duration == 5.0
    assert np.allclose(tr.time[:3], [1.0, 1.5, 2.0])
    w = tr.window(2.0, 1.5)
    assert list(w.samples) == [2.0, 3.0, 4.0]
    assert w.t0 == 2.0
    with pytest.raises(ValueError, match="window exceeds trace"):
        tr.window(4.0, 3.0)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(unit="volts"), dict(samples=np.ones((2, 2))),
                                dict(samples=np.array([1.0, np.nan]))])
def test_validation(kw):
    base = dict(t0=0.0, dt=1.0, samples=np.ones(3), unit="intensity")
    base.update(kw)
    with pytest.raises(ValueError):
        Trace(**base)
