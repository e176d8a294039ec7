"""File interchange: binary PPM/PGM, Middlebury ``.flo``, channel traces and reports."""
import csv
import io as _stdio
import json
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core import ChannelKind, HIGH_RES, LOST, as_flow, as_image, low_res

FLO_MAGIC = 202021.25
_FLO_HEADER = struct.Struct("<fii")
_WHITESPACE = b" \t\n\r\v\f"


class ParseError(ValueError):
    """Malformed input; ``offset`` is a byte offset, ``token_index`` a trace token index."""

    def __init__(self, message, offset=None, token_index=None):
        where = []
        if offset is not None:
            where.append(f"byte {offset}")
        if token_index is not None:
            where.append(f"token {token_index}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.offset = offset
        self.token_index = token_index


# ----------------------------------------------------------------------------- PPM / PGM

def _read_header_token(buf, pos):
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", offset=start)
    return buf[start:pos], start, pos


def decode_ppm(buf):
    buf = bytes(buf)
    if len(buf) < 2 or buf[:2] not in (b"P5", b"P6"):
        raise ParseError(f"not a binary PPM/PGM (magic {buf[:2]!r})", offset=0)
    channels = 3 if buf[:2] == b"P6" else 1
    pos = 2
    if pos < len(buf) and buf[pos:pos + 1] not in _WHITESPACE and buf[pos:pos + 1] != b"#":
        raise ParseError("magic must be followed by whitespace", offset=pos)
    values = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _read_header_token(buf, pos)
        if not tok.isdigit():
            raise ParseError(f"{name} is not a decimal integer: {tok!r}", offset=start)
        values.append((int(tok), start))
    (width, w_off), (height, h_off), (maxval, m_off) = values
    if width < 1:
        raise ParseError(f"width must be positive, got {width}", offset=w_off)
    if height < 1:
        raise ParseError(f"height must be positive, got {height}", offset=h_off)
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}", offset=m_off)
    if pos >= len(buf) or buf[pos:pos + 1] not in _WHITESPACE:
        raise ParseError("missing whitespace after maxval", offset=pos)
    pos += 1
    need = width * height * channels
    have = len(buf) - pos
    if have < need:
        raise ParseError(f"truncated payload: {have} of {need} bytes", offset=len(buf))
    if have > need:
        raise ParseError(f"{have - need} trailing bytes after payload", offset=pos + need)
    data = np.frombuffer(buf, dtype=np.uint8, count=need, offset=pos)
    return data.reshape(height, width, channels).astype(np.float64) / 255.0


def quantize(image):
    """[0, 1] floats to uint8, rounding half away from zero."""
    img = np.clip(as_image(image), 0.0, 1.0)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)


def encode_ppm(image, comment=None):
    """Canonical header ``P6\nW H\n255\n`` (P5 for one channel), optionally with a ``#`` comment line."""
    q = quantize(image)
    h, w, c = q.shape
    magic = b"P6" if c == 3 else b"P5"
    note = b""
    if comment:
        note = b"".join(b"# " + line.encode("utf-8") + b"\n" for line in str(comment).splitlines())
    return magic + b"\n" + note + f"{w} {h}\n255\n".encode("ascii") + q.tobytes()


def read_ppm(path):
    return decode_ppm(Path(path).read_bytes())


def write_ppm(path, image, comment=None):
    Path(path).write_bytes(encode_ppm(image, comment))


# ----------------------------------------------------------------------------- .flo

def decode_flo(buf):
    buf = bytes(buf)
    if len(buf) < _FLO_HEADER.size:
        raise ParseError(f"file too short for .flo header ({len(buf)} bytes)", offset=len(buf))
    magic, width, height = _FLO_HEADER.unpack_from(buf, 0)
    if magic != FLO_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {FLO_MAGIC}", offset=0)
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", offset=4)
    need = 8 * width * height
    have = len(buf) - _FLO_HEADER.size
    if have != need:
        raise ParseError(f"payload is {have} bytes, {width}x{height} flow needs {need}",
                         offset=_FLO_HEADER.size + min(have, need))
    data = np.frombuffer(buf, dtype="<f4", offset=_FLO_HEADER.size, count=2 * width * height)
    return data.reshape(height, width, 2).astype(np.float64)


def encode_flo(flow):
    fl = as_flow(flow)
    h, w = fl.shape[:2]
    return _FLO_HEADER.pack(FLO_MAGIC, w, h) + fl.astype("<f4").tobytes()


def read_flo(path):
    return decode_flo(Path(path).read_bytes())


def write_flo(path, flow):
    Path(path).write_bytes(encode_flo(flow))


# ----------------------------------------------------------------------------- traces

@dataclass(frozen=True)
class ChannelTrace:
    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        if len(events) < 3 or any(e.kind is not ChannelKind.HIGH_RES for e in events[:3]):
            raise ValueError("a trace must start with 3 high-res events to bootstrap the history")
        object.__setattr__(self, "events", events)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def to_text(self):
        return " ".join(e.token for e in self.events)


_LOW_RES_TOKEN = re.compile(r"L(.*)")


def parse_trace(text):
    """Parse ``H`` / ``L<s>`` / ``X`` tokens (``#`` starts a comment) into a trace."""
    tokens = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    events = []
    for i, tok in enumerate(tokens):
        if tok == "H":
            events.append(HIGH_RES)
        elif tok == "X":
            events.append(LOST)
        elif (m := _LOW_RES_TOKEN.fullmatch(tok)) is not None:
            if not re.fullmatch(r"[0-9]+", m.group(1)):
                raise ParseError(f"low-res scale in {tok!r} is not an integer", token_index=i)
            s = int(m.group(1))
            if s < 2:
                raise ParseError(f"low-res scale must be >= 2, got {s}", token_index=i)
            events.append(low_res(s))
        else:
            raise ParseError(f"unknown trace token {tok!r}", token_index=i)
    if not events:
        raise ParseError("empty trace")
    for i in range(3):
        if i >= len(events) or events[i].kind is not ChannelKind.HIGH_RES:
            raise ParseError("trace must begin with 3 'H' events to bootstrap the history", token_index=i)
    return ChannelTrace(tuple(events))


def read_trace(path):
    return parse_trace(Path(path).read_text())


# ----------------------------------------------------------------------------- reports

@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    channel_kind: str
    psnr: float
    ssim: float
    charbonnier: float
    scale: Optional[int] = None
    epe: Optional[float] = None
    provenance: str = "received"
    references: tuple = ()

    def to_dict(self):
        return {
            "frame_index": self.frame_index,
            "channel_kind": self.channel_kind,
            "scale": self.scale,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "charbonnier": self.charbonnier,
            "epe": self.epe,
            "provenance": self.provenance,
            "references": list(self.references),
        }


METRICS = ("psnr", "ssim", "charbonnier", "epe")
CSV_COLUMNS = ("frame_index", "channel_kind", "scale", "psnr", "ssim", "charbonnier", "epe", "provenance")


def _mean(values):
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


@dataclass
class RecoveryReport:
    per_frame: List[FrameRecord] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    @property
    def aggregate(self):
        out = {"frames": len(self.per_frame)}
        for m in METRICS:
            out[m] = _mean(getattr(r, m) for r in self.per_frame)
        return out

    def to_dict(self):
        return {
            "config": self.config_echo,
            "per_frame": [r.to_dict() for r in self.per_frame],
            "aggregate": self.aggregate,
        }


def report_to_json(report):
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def report_to_csv(report):
    buf = _stdio.StringIO()
    if report.config_echo:
        buf.write("# config " + json.dumps(report.config_echo, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.per_frame:
        d = r.to_dict()
        writer.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    agg = report.aggregate
    writer.writerow(["aggregate", "", "", _cell(agg["psnr"]), _cell(agg["ssim"]),
                     _cell(agg["charbonnier"]), _cell(agg["epe"]), f"frames={agg['frames']}"])
    return buf.getvalue()


def write_report(report, path, fmt=None):
    """Serialise deterministically; ``fmt`` defaults from the file suffix (json/csv)."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "json").lower()
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_report(path):
    d = json.loads(Path(path).read_text())
    records = [FrameRecord(**{**r, "references": tuple(r.get("references", ()))}) for r in d["per_frame"]]
    return RecoveryReport(records, d.get("config", {}))


def write_table_csv(rows, path=None, header_comment=None):
    """Write a list of flat dicts (one per row, same keys) as CSV; returns the text.

    ``header_comment`` goes on a leading ``#`` line (e.g. the run configuration).
    """
    buf = _stdio.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    if rows:
        writer = csv.writer(buf, lineterminator="\n")
        keys = list(rows[0])
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in keys])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
