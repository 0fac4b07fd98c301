import io
import json
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wifitopo.errors import ParseError, ValidationError
from wifitopo.ingest import (Blacklist, WifiDataset, WifiObservation, augment_ap_invisibility,
                             filter_mobile_aps, load_blacklist, parse_accel_records,
                             parse_wifi_records, restrict_device, wifi_to_string)

HEADER = "timestamp_ms,device,bssid,ssid,rssi\n"


def wifi(text, fmt="csv"):
    return parse_wifi_records(io.StringIO(text), fmt)


def obs(t, b, r, device="A", ssid=None):
    return WifiObservation(t, device, b, r, ssid)


def test_single_row_maps_fields():
    ds = wifi(HEADER + "1000,phoneA,aa:bb,eduroam,-62\n")
    (o,) = ds.observations
    assert (o.timestamp, o.device, o.bssid, o.ssid, o.rssi) == (1000, "phoneA", "aa:bb", "eduroam", -62)
    assert ds.ap_universe == {"aa:bb"}


def test_empty_stream():
    for text in ("", HEADER):
        ds = wifi(text)
        assert len(ds) == 0 and ds.ap_universe == frozenset()


def test_rows_are_time_sorted():
    ds = wifi(HEADER + "3000,A,b,,-50\n1000,A,b,,-51\n2000,A,b,,-52\n")
    assert [o.timestamp for o in ds] == [1000, 2000, 3000]


def test_missing_ssid_is_none():
    ds = wifi(HEADER + "1,A,b,,-50\n")
    assert ds.observations[0].ssid is None


def test_jsonl_input():
    lines = [json.dumps(dict(timestamp_ms=5, device="A", bssid="b", ssid=None, rssi=-40)),
             json.dumps(dict(timestamp_ms=1, device="A", bssid="c", rssi=-41))]
    ds = wifi("\n".join(lines) + "\n", "jsonl")
    assert [o.bssid for o in ds] == ["c", "b"]


@pytest.mark.parametrize("row", ["abc,A,b,,-50", "1000,A,b,,", "1000,A,,x,-50",
                                 "1000,A,b,x,-50.5", "1000,A,b,x,-50,extra"])
def test_malformed_row_reports_line(row):
    with pytest.raises(ParseError) as err:
        wifi(HEADER + "1,A,b,,-50\n" + row + "\n")
    assert "line 3" in str(err.value)


def test_bad_json_line():
    with pytest.raises(ParseError, match="line 2"):
        wifi('{"timestamp_ms":1,"device":"A","bssid":"b","rssi":-50}\n{oops\n', "jsonl")


@pytest.mark.parametrize("rssi", [-101, -9, 0, -200])
def test_rssi_out_of_range(rssi):
    with pytest.raises(ValidationError):
        wifi(HEADER + f"1,A,b,,{rssi}\n")


def test_rssi_bounds_inclusive():
    ds = wifi(HEADER + "1,A,b,,-100\n1,A,c,,-10\n")
    assert sorted(o.rssi for o in ds) == [-100, -10]


def test_duplicate_triple_conflict():
    with pytest.raises(ValidationError, match="conflicting"):
        wifi(HEADER + "1,A,b,,-50\n1,A,b,,-51\n")


def test_duplicate_triple_identical_is_collapsed():
    assert len(wifi(HEADER + "1,A,b,,-50\n1,A,b,,-50\n")) == 1


@pytest.mark.parametrize("vec, expected", [((0, 0, 9.81), 9.81), ((3, 4, 0), 5.0), ((0, 0, 0), 0.0)])
def test_accel_norm(vec, expected):
    text = "timestamp_ms,device,ax,ay,az\n" + "1,A,{},{},{}\n".format(*vec)
    (a,) = parse_accel_records(io.StringIO(text))
    assert a.magnitude == pytest.approx(expected, abs=1e-12)


def test_accel_magnitude_column_and_sorting():
    text = "timestamp_ms,device,magnitude\n20,A,9.8\n10,A,9.7\n"
    acc = parse_accel_records(io.StringIO(text))
    assert [a.timestamp for a in acc] == [10, 20]


def test_accel_negative_magnitude_rejected():
    with pytest.raises(ValidationError):
        parse_accel_records(io.StringIO("timestamp_ms,device,magnitude\n1,A,-0.1\n"))


def test_accel_malformed():
    with pytest.raises(ParseError):
        parse_accel_records(io.StringIO("timestamp_ms,device,ax,ay,az\n1,A,1,x,3\n"))


# -- blacklist -------------------------------------------------------------


def test_blacklist_suffix_rule():
    ds = WifiDataset.from_observations([obs(1, "x", -50, ssid="Tim's iPhone"), obs(1, "y", -60, ssid="corp")])
    out = filter_mobile_aps(ds, Blacklist(suffixes=("iPhone",)))
    assert [o.bssid for o in out] == ["y"] and out.ap_universe == {"y"}


def test_blacklist_prefix_rule_case_insensitive():
    ds = WifiDataset.from_observations([obs(1, "x", -50, ssid="androidhotspot4411"), obs(1, "y", -60, ssid="corp")])
    out = filter_mobile_aps(ds, Blacklist(prefixes=("AndroidHotspot",)))
    assert [o.bssid for o in out] == ["y"]


def test_empty_blacklist_is_identity():
    ds = WifiDataset.from_observations([obs(1, "x", -50, ssid="Porsche")])
    assert filter_mobile_aps(ds, Blacklist()) == ds


def test_blacklist_keeps_missing_ssid():
    ds = WifiDataset.from_observations([obs(1, "x", -50)])
    assert len(filter_mobile_aps(ds, Blacklist(prefixes=("",)))) == 1


def test_load_blacklist_file():
    bl = load_blacklist(io.StringIO("# car hotspots\nprefix:Porsche\nsuffix:iPhone\n\n"))
    assert bl.matches("PORSCHE_WLAN") and bl.matches("my iphone") and not bl.matches("eduroam")
    with pytest.raises(ParseError):
        load_blacklist(io.StringIO("contains:foo\n"))


ssids = st.one_of(st.none(), st.sampled_from(["eduroam", "Tim's iPhone", "AndroidHotspot1", "corp", "porsche"]))
observations = st.lists(
    st.builds(WifiObservation, st.integers(0, 50), st.sampled_from("AB"),
              st.sampled_from(["b1", "b2", "b3"]), st.integers(-100, -10), ssids),
    max_size=30, unique_by=lambda o: (o.timestamp, o.device, o.bssid))


@settings(max_examples=60, deadline=None)
@given(observations)
def test_filter_idempotent(items):
    ds = WifiDataset.from_observations(items)
    bl = Blacklist(prefixes=("android", "porsche"), suffixes=("iphone",))
    once = filter_mobile_aps(ds, bl)
    assert filter_mobile_aps(once, bl) == once


@settings(max_examples=60, deadline=None)
@given(observations, st.sampled_from(["csv", "jsonl"]))
def test_serialize_round_trip(items, fmt):
    ds = WifiDataset.from_observations(items)
    back = wifi(wifi_to_string(ds, fmt), fmt)
    assert back == ds
    assert [o.ssid for o in back] == [o.ssid for o in ds]


# -- device restriction -----------------------------------------------------


def test_restrict_device():
    ds = WifiDataset.from_observations([obs(1, "x", -50, "A"), obs(2, "y", -50, "B")])
    a = restrict_device(ds, "A")
    assert {o.device for o in a} == {"A"} and a.ap_universe == {"x"}


def test_restrict_absent_device_warns():
    ds = WifiDataset.from_observations([obs(1, "x", -50, "A")])
    with pytest.warns(UserWarning):
        assert len(restrict_device(ds, "C")) == 0


def test_restrict_single_device_identity():
    ds = WifiDataset.from_observations([obs(1, "x", -50, "A"), obs(2, "y", -40, "A")])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert restrict_device(ds, "A") == ds


# -- invisibility augmentation ---------------------------------------------


def test_augment_adds_missing_ap():
    ds = WifiDataset.from_observations([obs(1000, "b1", -60), obs(2000, "b2", -70)])
    aug = augment_ap_invisibility(ds, scan_epsilon=0)
    assert obs(1000, "b2", -100) in aug.observations
    assert obs(2000, "b1", -100) in aug.observations
    assert len(aug) == 4


def test_augment_complete_scan_adds_nothing():
    ds = WifiDataset.from_observations([obs(1000, "b1", -60), obs(1000, "b2", -70)])
    assert augment_ap_invisibility(ds) == ds


def test_augment_counts_and_preserves_values():
    universe = [f"b{k}" for k in range(7)]
    full = [obs(0, b, -50 - k) for k, b in enumerate(universe)]
    partial = [obs(5000, b, -60) for b in universe[:3]]
    ds = WifiDataset.from_observations(full + partial)
    aug = augment_ap_invisibility(ds)
    added = set(aug.observations) - set(ds.observations)
    assert len(added) == 7 - 3
    assert all(o.rssi == -100 and o.timestamp == 5000 for o in added)
    assert set(ds.observations) <= set(aug.observations)


def test_augment_groups_jittered_scan():
    # one scan reported over a few milliseconds
    ds = WifiDataset.from_observations([obs(1000, "b1", -60), obs(1003, "b2", -61),
                                        obs(4000, "b1", -62)])
    aug = augment_ap_invisibility(ds, scan_epsilon=500)
    assert len(aug) == 4
    assert obs(4000, "b2", -100) in aug.observations


def test_augment_rejects_multi_device():
    ds = WifiDataset.from_observations([obs(1, "x", -50, "A"), obs(1, "x", -50, "B")])
    with pytest.raises(ValidationError):
        augment_ap_invisibility(ds)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.builds(WifiObservation, st.integers(0, 20).map(lambda k: k * 1000), st.just("A"),
                          st.sampled_from(["b1", "b2", "b3", "b4"]), st.integers(-99, -10)),
                max_size=40, unique_by=lambda o: (o.timestamp, o.bssid)))
def test_augment_every_scan_has_every_ap_once(items):
    ds = WifiDataset.from_observations(items)
    aug = augment_ap_invisibility(ds, scan_epsilon=0)
    pairs = [(o.timestamp, o.bssid) for o in aug]
    assert len(pairs) == len(set(pairs))
    assert set(pairs) == {(t, b) for t in ds.timestamps for b in ds.ap_universe}
    originals = {(o.timestamp, o.bssid): o.rssi for o in ds}
    assert all(o.rssi == originals[(o.timestamp, o.bssid)] for o in aug if (o.timestamp, o.bssid) in originals)
