import json

import numpy as np
import pytest

import hprm


def test_tag_order_and_sentinels():
    assert hprm.Tag(5, 0) < hprm.Tag(5, 1) < hprm.Tag(6, 0)
    assert hprm.Tag.never() < hprm.Tag(-(2**62)) < hprm.Tag.forever()
    assert hprm.Tag(3, 2) == hprm.Tag(3, 2)
    assert len({hprm.Tag(3, 2), hprm.Tag(3, 2), hprm.Tag(3, 3)}) == 2
    assert hprm.Tag.forever().is_forever() and not hprm.Tag(0).is_never()


def test_delay_tag():
    assert hprm.delay_tag(hprm.Tag(10, 4), 5) == hprm.Tag(15, 0)
    assert hprm.delay_tag(hprm.Tag(10, 4), 0) == hprm.Tag(10, 5)
    assert hprm.delay_tag(hprm.Tag(10, 4)) == hprm.Tag(10, 5)
    assert hprm.delay_tag(hprm.Tag(2**63 - 10), 100).is_forever()
    assert hprm.next_microstep(hprm.Tag(1, 1)) == hprm.Tag(1, 2)
    with pytest.raises(ValueError):
        hprm.delay_tag(hprm.Tag(0), -1)


def test_round_trip_nested_values():
    value = {
        "seq": 7,
        "ok": True,
        "ratio": 0.25,
        "name": "lidar",
        "raw": b"\x00\x01\x02",
        "nothing": None,
        "items": [1, "two", [3.0]],
    }
    back = hprm.deserialize(hprm.serialize(value))
    assert back == {**value, "items": [1, "two", [3.0]]}


@pytest.mark.parametrize("dtype", ["int8", "uint16", "int32", "uint64", "float32", "float64", "bool"])
def test_arrays_round_trip(dtype):
    arr = (np.arange(24) % 2 == 0) if dtype == "bool" else np.arange(24).astype(dtype)
    arr = arr.reshape(2, 3, 4)
    back = hprm.deserialize(hprm.serialize({"a": arr}, out_of_band_floor=0))["a"]
    assert back.dtype == arr.dtype
    assert back.shape == (2, 3, 4)
    np.testing.assert_array_equal(back, arr)


def test_large_arrays_are_views_into_the_payload():
    arr = np.linspace(0.0, 1.0, 1 << 18)
    wire = hprm.serialize(arr)
    layout = hprm.payload_layout(arr)
    assert layout["segments"] == [arr.nbytes]
    assert layout["encoded_size"] == len(wire)
    back = hprm.deserialize(wire)
    assert not back.flags.writeable
    assert not back.flags.owndata
    np.testing.assert_array_equal(back, arr)


def test_non_contiguous_arrays_are_accepted():
    arr = np.arange(20, dtype=np.int64).reshape(4, 5)[:, ::2]
    np.testing.assert_array_equal(hprm.deserialize(hprm.serialize(arr)), arr)


def test_classify():
    assert hprm.classify(3) == "in_band"
    assert hprm.classify(np.zeros(1 << 16)) == "out_of_band"
    assert hprm.classify({"a": np.zeros(1 << 16), "b": 1}) == "recursive"
    assert hprm.classify(np.zeros(1 << 16), out_of_band_floor=2**63) == "in_band"


def test_decode_errors_carry_codes():
    wire = hprm.serialize(np.zeros(4096))
    with pytest.raises(hprm.HprmError) as info:
        hprm.deserialize(wire[:-1])
    assert info.value.code in {"truncated", "segment-mismatch"}
    with pytest.raises(hprm.HprmError) as info:
        hprm.deserialize(b"\x09" + wire[1:])
    assert info.value.code == "unknown-schema"


def test_unsupported_objects():
    with pytest.raises(TypeError):
        hprm.serialize(object())
    with pytest.raises(TypeError):
        hprm.serialize({1: 2})
    with pytest.raises(TypeError):
        hprm.serialize(np.zeros(3, dtype=np.complex128))


def test_topology_validation():
    ok = {"federates": ["s", "p"], "connections": [{"from": "s.out", "to": "p.in", "after_ns": 5}]}
    assert hprm.validate_topology(json.dumps(ok)) == []
    loop = {
        "federates": ["a", "b"],
        "connections": [{"from": "a.out", "to": "b.in"}, {"from": "b.out", "to": "a.in"}],
    }
    (violation,) = hprm.validate_topology(json.dumps(loop))
    assert violation["kind"] == "zero_delay_cycle"
    assert sorted(violation["federates"]) == ["a", "b"]
    assert json.loads(hprm.normalize_topology(json.dumps(ok)))["federates"] == ["s", "p"]
    with pytest.raises(ValueError):
        hprm.validate_topology("{")


def test_percentile_and_report():
    assert hprm.percentile([15, 20, 35, 40, 50], 0.5) == 35
    with pytest.raises(ValueError):
        hprm.percentile([1], 0.0)
    with pytest.raises(hprm.HprmError):
        hprm.percentile([], 0.5)
    report = hprm.format_report([("serde", "in-band", 10, 0, 4), ("serde", "in-band", 10, 1, 6)])
    assert report.endswith("serde,in-band,10,2,5.000,4,6\n")


def test_out_of_band_is_faster_for_large_arrays():
    oob = hprm.measure_throughput(4 << 20, "out_of_band", 9)
    inb = hprm.measure_throughput(4 << 20, "in_band", 9)
    assert oob["serialize_mb_per_s"] > inb["serialize_mb_per_s"]


def test_small_arrays_outlive_their_payload():
    import gc

    wire = hprm.serialize({"small": np.arange(6, dtype=np.int32)})
    back = hprm.deserialize(wire)["small"]
    del wire
    gc.collect()
    np.testing.assert_array_equal(back, np.arange(6, dtype=np.int32))
