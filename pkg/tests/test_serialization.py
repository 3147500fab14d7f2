import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ebtk.bargmann import FockSpace, bargmann_eb_report
from ebtk.channels import (
    dephasing,
    holevo_to_channel,
    identity_channel,
    kraus_from_channel,
    random_channel,
    random_holevo,
)
from ebtk.config import RunConfig
from ebtk.criteria import eb_report, n_joint_feasibility, randomization_order
from ebtk.errors import DocumentError
from ebtk.serialization import (
    ChannelDocument,
    deserialize,
    dumps,
    from_doc,
    loads,
    matrix_from_doc,
    matrix_to_doc,
    serialize,
)


def round_trips(obj, **kw):
    text = serialize(obj, **kw)
    again = serialize(deserialize(text), **kw)
    assert text == again
    return text


@given(st.floats(allow_nan=True, allow_infinity=True))
def test_float_formatting_round_trips(x):
    back = loads(dumps([x]))[0]
    assert isinstance(back, float)
    if math.isnan(x):
        assert math.isnan(back)
    else:
        assert back == x and math.copysign(1, back) == math.copysign(1, x)


@given(st.lists(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e300), min_size=2, max_size=2), min_size=2, max_size=2))
def test_matrix_round_trip_is_bit_exact(rows):
    m = np.array(rows, dtype=complex)
    back = matrix_from_doc(loads(dumps(matrix_to_doc(m))))
    assert np.array_equal(back.view(float), m.view(float))


def test_channel_documents():
    h = random_holevo(2, 3, 4, 1)
    c = holevo_to_channel(h)
    round_trips(c)
    round_trips(ChannelDocument(c, kraus_from_channel(c), h))
    round_trips(h)
    round_trips(h.povm)
    round_trips(RunConfig(joint_levels=(2, 4), seed=9))
    doc = json.loads(serialize(random_channel(2, 2, 2, 3)))
    assert doc["normalization"] == "trace_one" and set(doc["choi"]) == {"re", "im"}


def test_feasibility_documents():
    round_trips(n_joint_feasibility(dephasing(2), 2))
    round_trips(n_joint_feasibility(identity_channel(2), 2))
    text = round_trips(randomization_order(dephasing(2), dephasing(2)))
    assert json.loads(text)["details"]["alpha"]["type"] == "channel"


def test_report_documents():
    text = round_trips(eb_report(identity_channel(2)))
    doc = json.loads(text)
    assert doc["verdict"] == "NotEB" and "timings" not in doc
    assert doc["config"] == {"type": "run_config", **RunConfig().to_dict()}
    r = eb_report(holevo_to_channel(random_holevo(2, 2, 3, 4)))
    round_trips(r)
    assert "timings" in json.loads(round_trips(r, timings=True))
    round_trips(bargmann_eb_report(FockSpace(1)))


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"type": "channel", "dim_in": 2}, "dim_out"),
        ({"type": "channel", "dim_in": 2, "dim_out": 2, "normalization": "trace_d", "choi": {}}, "normalization"),
        ({"type": "channel", "dim_in": 1, "dim_out": 1, "normalization": "trace_one", "choi": {"re": [[1]], "im": [["x"]]}}, "choi.im"),
        ({"type": "channel", "dim_in": 1, "dim_out": 1, "normalization": "trace_one", "choi": {"re": [[2]], "im": [[0]]}}, "choi"),
        ({"type": "povm", "dim": 2, "effects": []}, "effects"),
        ({"type": "run_config", "eps_feas": -1}, "eps_feas"),
        ({"type": "run_config", "bogus": 1}, "bogus"),
        ({"type": "spaceship"}, "type"),
    ],
)
def test_bad_documents_name_the_field(doc, field):
    with pytest.raises(DocumentError) as exc:
        from_doc(doc)
    assert exc.value.field == field


def test_kraus_block_must_match():
    c = random_channel(2, 2, 2, 1)
    other = kraus_from_channel(random_channel(2, 2, 2, 2))
    doc = json.loads(serialize(ChannelDocument(c, other)))
    with pytest.raises(DocumentError) as exc:
        from_doc(doc)
    assert exc.value.field == "kraus"


def test_invalid_json():
    with pytest.raises(DocumentError):
        deserialize('{"type": ')
