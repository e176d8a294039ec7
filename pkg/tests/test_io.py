import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from streamrecover.core import ChannelKind
from streamrecover.io import (
    FrameRecord, ParseError, RecoveryReport, decode_flo, decode_ppm, encode_flo, encode_ppm, parse_trace, quantize,
    read_flo, read_ppm, read_report, report_to_csv, report_to_json, write_flo, write_ppm, write_report)


def ppm(w, h, payload, magic=b"P6", maxval=b"255"):
    return magic + b"\n" + f"{w} {h}\n".encode() + maxval + b"\n" + payload


def test_white_pixel():
    img = decode_ppm(ppm(1, 1, b"\xff\xff\xff"))
    assert img.shape == (1, 1, 3) and np.all(img == 1.0)


def test_ppm_canonical_roundtrip(tmp_path, rng):
    for magic, c in ((b"P6", 3), (b"P5", 1)):
        payload = rng.integers(0, 256, size=5 * 7 * c, dtype=np.uint8).tobytes()
        data = ppm(7, 5, payload, magic)
        path = tmp_path / "a.ppm"
        path.write_bytes(data)
        write_ppm(tmp_path / "b.ppm", read_ppm(path))
        assert (tmp_path / "b.ppm").read_bytes() == data


def test_ppm_header_comments_and_whitespace():
    data = b"P6 # comment\n 2\t1 # w h\n255\n" + bytes(range(6))
    img = decode_ppm(data)
    assert img.shape == (1, 2, 3)
    assert quantize(img).ravel().tolist() == list(range(6))


def test_ppm_comment_echo_is_readable():
    img = np.full((2, 3, 3), 0.25)
    data = encode_ppm(img, comment="run {\"scale\": 4}\nsecond line")
    assert data.startswith(b"P6\n# run")
    assert np.array_equal(quantize(decode_ppm(data)), quantize(img))


def test_quantize_rounds_half_up():
    v = np.array([[0.0, 0.5 / 255, 1.5 / 255, 1.0]])
    assert quantize(v).ravel().tolist() == [0, 1, 2, 255]


def test_flo_examples(tmp_path):
    f = np.array([[[3.0, -2.0]]])
    data = encode_flo(f)
    assert len(data) == 20
    assert np.array_equal(decode_flo(data), f)
    g = np.arange(8, dtype=np.float64).reshape(2, 2, 2) * 0.37
    write_flo(tmp_path / "g.flo", g)
    back = read_flo(tmp_path / "g.flo")
    assert np.array_equal(back, g.astype(np.float32).astype(np.float64))
    assert encode_flo(back) == (tmp_path / "g.flo").read_bytes()


@settings(max_examples=50, deadline=None)
@given(st.tuples(st.integers(1, 5), st.integers(1, 5)).flatmap(
    lambda hw: arrays(np.float32, hw + (2,), elements=st.floats(-1e6, 1e6, width=32))))
def test_flo_bit_exact(flow32):
    f = flow32.astype(np.float64)
    out = decode_flo(encode_flo(f))
    assert out.tobytes() == f.tobytes()


# each entry: (label, decoder, bytes)
MALFORMED = [
    ("ppm bad magic", decode_ppm, b"P3\n1 1\n255\n\x00\x00\x00"),
    ("ppm empty", decode_ppm, b""),
    ("ppm truncated payload", decode_ppm, ppm(2, 2, b"\x00" * 11)),
    ("ppm trailing bytes", decode_ppm, ppm(1, 1, b"\x00" * 4)),
    ("ppm 16-bit maxval", decode_ppm, ppm(1, 1, b"\x00" * 6, maxval=b"65535")),
    ("ppm zero width", decode_ppm, ppm(0, 1, b"")),
    ("ppm non-numeric size", decode_ppm, b"P6\nx 1\n255\n\x00\x00\x00"),
    ("ppm header cut short", decode_ppm, b"P6\n2 2"),
    ("ppm negative height", decode_ppm, b"P6\n1 -1\n255\n"),
    ("flo wrong magic", decode_flo, struct.pack("<fii", 202021.0, 1, 1) + b"\x00" * 8),
    ("flo short header", decode_flo, b"PIEH"),
    ("flo truncated", decode_flo, struct.pack("<fii", 202021.25, 2, 2) + b"\x00" * 30),
    ("flo trailing", decode_flo, struct.pack("<fii", 202021.25, 1, 1) + b"\x00" * 9),
    ("flo zero dims", decode_flo, struct.pack("<fii", 202021.25, 0, 5)),
    ("trace scale 1", parse_trace, "H H H L1"),
    ("trace short bootstrap", parse_trace, "H H X H"),
    ("trace unknown token", parse_trace, "H H H Q"),
    ("trace empty", parse_trace, "   # nothing\n"),
    ("trace scale not integer", parse_trace, "H H H L2.5"),
]


@pytest.mark.parametrize("label,decoder,data", MALFORMED, ids=[m[0] for m in MALFORMED])
def test_malformed_rejected_with_diagnostic(label, decoder, data):
    with pytest.raises(ParseError) as info:
        decoder(data)
    assert str(info.value)


def test_truncation_reports_offset():
    with pytest.raises(ParseError) as info:
        decode_ppm(ppm(2, 2, b"\x00" * 11))
    assert info.value.offset is not None
    with pytest.raises(ParseError) as info:
        parse_trace("H H H L4 Z")
    assert info.value.token_index == 4


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=64))
def test_decoders_never_crash(blob):
    for dec in (decode_ppm, decode_flo):
        try:
            dec(blob)
        except ParseError:
            pass


def test_parse_trace():
    tr = parse_trace("H H H L4 X H")
    assert [e.kind for e in tr] == [ChannelKind.HIGH_RES] * 3 + [ChannelKind.LOW_RES, ChannelKind.LOST,
                                                                  ChannelKind.HIGH_RES]
    assert tr[3].scale == 4 and len(tr) == 6
    assert tr.to_text() == "H H H L4 X H"
    assert parse_trace("H H\nH # bootstrap\nX").to_text() == "H H H X"


def _report(epe=None):
    recs = [FrameRecord(3, "low_res", 30.5, 0.9, 0.01, scale=4, epe=epe, provenance="enhanced", references=(0, 1, 2)),
            FrameRecord(4, "high_res", 99.0, 1.0, 1e-6)]
    return RecoveryReport(recs, {"seed": 1})


def test_report_empty(tmp_path):
    rep = RecoveryReport([], {"seed": 0})
    write_report(rep, tmp_path / "e.json")
    d = json.loads((tmp_path / "e.json").read_text())
    assert d["per_frame"] == [] and d["aggregate"]["frames"] == 0 and d["aggregate"]["psnr"] is None
    write_report(rep, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[-1].startswith("aggregate")


def test_report_deterministic(tmp_path):
    for name in ("a.json", "b.json", "a.csv", "b.csv"):
        write_report(_report(0.5), tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_report_missing_epe():
    rep = _report(None)
    d = json.loads(report_to_json(rep))
    assert d["per_frame"][0]["epe"] is None
    lines = report_to_csv(rep).splitlines()
    assert lines[0].startswith("# config")
    header = lines[1].split(",")
    row = lines[2].split(",")
    assert row[header.index("epe")] == ""


def test_report_aggregate_and_readback(tmp_path):
    rep = _report(0.5)
    agg = rep.aggregate
    assert agg["psnr"] == pytest.approx((30.5 + 99.0) / 2)
    assert agg["epe"] == 0.5
    write_report(rep, tmp_path / "r.json")
    back = read_report(tmp_path / "r.json")
    assert back.per_frame == rep.per_frame and back.config_echo == rep.config_echo
    with pytest.raises(ValueError):
        write_report(rep, tmp_path / "r.txt")
