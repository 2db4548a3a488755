"""Frame and clip model, colour conversion, container I/O and PSNR.

Every real value stored into an 8-bit sample goes through :func:`to_u8`
(round half away from zero, then clamp to [0, 255]) so that all schemes share
one reproducible quantisation rule.
"""

from __future__ import annotations

import enum
import io
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from PIL import Image

from .errors import DimensionError, FormatError, UsageError


class ColorSpace(str, enum.Enum):
    GRAY8 = "GRAY8"
    RGB8 = "RGB8"
    YCBCR8 = "YCBCR8"

    @property
    def nplanes(self) -> int:
        return 1 if self is ColorSpace.GRAY8 else 3


class ContainerFormat(str, enum.Enum):
    Y4M_I420 = "Y4M_I420"
    PNG_DIR = "PNG_DIR"


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def to_u8(x) -> np.ndarray:
    """Quantise real samples to uint8 with the toolkit-wide rounding rule."""
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)


@dataclass
class Frame:
    planes: np.ndarray  # (nplanes, height, width) uint8
    colorspace: ColorSpace = ColorSpace.GRAY8
    index: int = 0

    def __post_init__(self):
        self.colorspace = ColorSpace(self.colorspace)
        planes = np.asarray(self.planes)
        if planes.ndim == 2:
            planes = planes[None]
        if planes.ndim != 3:
            raise DimensionError(f"planes must be 3-D (c, h, w), got shape {planes.shape}")
        if planes.shape[0] != self.colorspace.nplanes:
            raise DimensionError(
                f"{self.colorspace.value} needs {self.colorspace.nplanes} planes, got {planes.shape[0]}"
            )
        if planes.dtype != np.uint8:
            if planes.size and (planes.min() < 0 or planes.max() > 255):
                raise UsageError("sample values must lie in [0, 255]")
            planes = planes.astype(np.uint8)
        self.planes = planes

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @classmethod
    def gray(cls, samples, index: int = 0) -> "Frame":
        return cls(np.asarray(samples)[None], ColorSpace.GRAY8, index)

    def copy(self, planes=None, index=None) -> "Frame":
        return Frame(
            self.planes.copy() if planes is None else planes,
            self.colorspace,
            self.index if index is None else index,
        )


@dataclass
class VideoClip:
    frames: List[Frame]
    fps: float = 25.0
    label: str = ""

    def __post_init__(self):
        self.frames = list(self.frames)
        if not self.frames:
            return
        first = self.frames[0]
        for i, f in enumerate(self.frames):
            if (f.width, f.height, f.colorspace) != (first.width, first.height, first.colorspace):
                raise DimensionError(
                    f"frame {i} is {f.width}x{f.height} {f.colorspace.value}, "
                    f"expected {first.width}x{first.height} {first.colorspace.value}"
                )
            if f.index != i:
                self.frames[i] = f.copy(planes=f.planes, index=i)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def colorspace(self) -> ColorSpace:
        return self.frames[0].colorspace

    def array(self) -> np.ndarray:
        """All samples as a (frames, planes, h, w) uint8 array."""
        return np.stack([f.planes for f in self.frames])

    @classmethod
    def from_array(cls, arr, colorspace=ColorSpace.GRAY8, fps=25.0, label="") -> "VideoClip":
        arr = np.asarray(arr)
        if arr.ndim == 3:
            arr = arr[:, None]
        return cls([Frame(a, colorspace, i) for i, a in enumerate(arr)], fps, label)

    def with_frames(self, frames: Sequence[Frame]) -> "VideoClip":
        return VideoClip([f.copy(planes=f.planes, index=i) for i, f in enumerate(frames)], self.fps, self.label)


# -- colour ------------------------------------------------------------------

_KR, _KG, _KB = 0.299, 0.587, 0.114
_CB_SCALE, _CR_SCALE = 0.564, 0.713


def _rgb_to_ycbcr(p: np.ndarray) -> np.ndarray:
    r, g, b = p.astype(np.float64)
    y = _KR * r + _KG * g + _KB * b
    return np.stack([y, 128.0 + (b - y) * _CB_SCALE, 128.0 + (r - y) * _CR_SCALE])


def _ycbcr_to_rgb(p: np.ndarray) -> np.ndarray:
    y, cb, cr = p.astype(np.float64)
    r = y + (cr - 128.0) / _CR_SCALE
    b = y + (cb - 128.0) / _CB_SCALE
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b])


def convert_colorspace(frame: Frame, target) -> Frame:
    """Full-range BT.601 conversion between RGB8 and YCBCR8/GRAY8."""
    target = ColorSpace(target)
    src = frame.colorspace
    if src is target:
        return frame.copy()
    if {src, target} == {ColorSpace.RGB8, ColorSpace.YCBCR8}:
        fn = _rgb_to_ycbcr if src is ColorSpace.RGB8 else _ycbcr_to_rgb
        return Frame(to_u8(fn(frame.planes)), target, frame.index)
    if src is ColorSpace.RGB8 and target is ColorSpace.GRAY8:
        return Frame(to_u8(_rgb_to_ycbcr(frame.planes)[:1]), target, frame.index)
    if src is ColorSpace.GRAY8 and target is ColorSpace.RGB8:
        return Frame(np.repeat(frame.planes, 3, axis=0), target, frame.index)
    raise UsageError(f"unsupported conversion {src.value} -> {target.value}")


def convert_clip(clip: VideoClip, target) -> VideoClip:
    return clip.with_frames([convert_colorspace(f, target) for f in clip])


def luma(frame: Frame) -> np.ndarray:
    """Real-valued luma plane (unrounded for RGB frames)."""
    if frame.colorspace is ColorSpace.RGB8:
        r, g, b = frame.planes.astype(np.float64)
        return _KR * r + _KG * g + _KB * b
    return frame.planes[0].astype(np.float64)


def with_luma(frame: Frame, new_luma: np.ndarray) -> Frame:
    """Replace the luma of ``frame`` while leaving chroma untouched.

    For RGB frames the luma change is added to all three channels; since the
    BT.601 weights sum to one this shifts Y by exactly that amount and leaves
    Cb/Cr unchanged, avoiding a lossy YCbCr round trip.
    """
    new_luma = np.asarray(new_luma, dtype=np.float64)
    if frame.colorspace is ColorSpace.RGB8:
        delta = new_luma - luma(frame)
        planes = to_u8(frame.planes.astype(np.float64) + delta[None])
    else:
        planes = frame.planes.copy()
        planes[0] = to_u8(new_luma)
    return frame.copy(planes=planes)


# -- containers --------------------------------------------------------------

_Y4M_MAGIC = b"YUV4MPEG2"
_420_TAGS = {"420", "420jpeg", "420paldv", "420mpeg2"}


def decode_y4m(data: bytes, label: str = "") -> VideoClip:
    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(_Y4M_MAGIC):
        raise FormatError("missing YUV4MPEG2 stream header", 0)
    width = height = None
    fps = 25.0
    pos = len(_Y4M_MAGIC)
    for token in data[pos:nl].split(b" "):
        if not token:
            pos += 1
            continue
        tag, val = chr(token[0]), token[1:].decode("ascii", "replace")
        try:
            if tag == "W":
                width = int(val)
            elif tag == "H":
                height = int(val)
            elif tag == "F":
                num, den = val.split(":")
                fps = int(num) / int(den) if int(den) else 25.0
            elif tag == "C" and val not in _420_TAGS:
                raise FormatError(f"unsupported chroma layout C{val}", pos)
            elif tag == "I" and val not in ("p", "?"):
                raise FormatError(f"interlaced stream I{val} not supported", pos)
        except ValueError:
            raise FormatError(f"bad header field {token!r}", pos) from None
        pos += len(token) + 1
    if not width or not height:
        raise FormatError("header lacks W/H", 0)
    cw, ch = (width + 1) // 2, (height + 1) // 2
    ysize, csize = width * height, cw * ch
    frames = []
    pos = nl + 1
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0 or not data.startswith(b"FRAME", pos):
            raise FormatError("expected FRAME marker", pos)
        pos = end + 1
        need = ysize + 2 * csize
        if pos + need > len(data):
            raise FormatError(f"truncated frame payload: need {need} bytes, have {len(data) - pos}", pos)
        buf = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
        y = buf[:ysize].reshape(height, width)
        up = lambda c: np.repeat(np.repeat(c.reshape(ch, cw), 2, 0), 2, 1)[:height, :width]
        cb = up(buf[ysize:ysize + csize])
        cr = up(buf[ysize + csize:])
        frames.append(Frame(np.stack([y, cb, cr]), ColorSpace.YCBCR8, len(frames)))
        pos += need
    return VideoClip(frames, fps, label)


def encode_y4m(clip: VideoClip) -> bytes:
    if not len(clip):
        raise UsageError("cannot save an empty clip")
    fps = float(clip.fps)
    num, den = (int(fps), 1) if fps.is_integer() else (int(round(fps * 1000)), 1000)
    out = io.BytesIO()
    out.write(f"YUV4MPEG2 W{clip.width} H{clip.height} F{num}:{den} Ip A1:1 C420jpeg\n".encode())
    for f in clip:
        if f.colorspace is ColorSpace.GRAY8:
            y = f.planes[0]
            cb = cr = np.full_like(y, 128)
        else:
            y, cb, cr = convert_colorspace(f, ColorSpace.YCBCR8).planes
        out.write(b"FRAME\n")
        out.write(np.ascontiguousarray(y).tobytes())
        # top-left sample of each 2x2 block
        out.write(np.ascontiguousarray(cb[::2, ::2]).tobytes())
        out.write(np.ascontiguousarray(cr[::2, ::2]).tobytes())
    return out.getvalue()


_PNG_NAME = re.compile(r"^\d+\.png$")


def _png_files(path: Path) -> List[Path]:
    files = [p for p in path.iterdir() if _PNG_NAME.match(p.name)]
    return sorted(files, key=lambda p: int(p.stem))


def load_clip(source: Union[str, os.PathLike], fmt=None) -> VideoClip:
    """Read a Y4M file (decoded to YCBCR8 4:4:4) or a directory of PNG frames."""
    path = Path(source)
    if fmt is None:
        fmt = ContainerFormat.PNG_DIR if path.is_dir() else ContainerFormat.Y4M_I420
    fmt = ContainerFormat(fmt)
    if not path.exists():
        raise UsageError(f"no such file or directory: {path}")
    if fmt is ContainerFormat.Y4M_I420:
        return decode_y4m(path.read_bytes(), label=path.name)
    frames = []
    for i, p in enumerate(_png_files(path)):
        try:
            img = Image.open(p)
            img.load()
        except OSError as exc:
            raise FormatError(f"{p.name}: {exc}", 0) from None
        if img.mode == "L":
            frames.append(Frame(np.asarray(img)[None], ColorSpace.GRAY8, i))
        else:
            frames.append(Frame(np.asarray(img.convert("RGB")).transpose(2, 0, 1), ColorSpace.RGB8, i))
    if not frames:
        raise FormatError(f"no %06d.png frames in {path}", 0)
    return VideoClip(frames, label=path.name)


def save_clip(clip: VideoClip, dest: Union[str, os.PathLike], fmt=None) -> None:
    path = Path(dest)
    if fmt is None:
        fmt = ContainerFormat.Y4M_I420 if path.suffix.lower() == ".y4m" else ContainerFormat.PNG_DIR
    fmt = ContainerFormat(fmt)
    if not len(clip):
        raise UsageError("cannot save an empty clip")
    if fmt is ContainerFormat.Y4M_I420:
        path.write_bytes(encode_y4m(clip))
        return
    path.mkdir(parents=True, exist_ok=True)
    for f in clip:
        if f.colorspace is ColorSpace.GRAY8:
            img = Image.fromarray(f.planes[0], "L")
        else:
            rgb = convert_colorspace(f, ColorSpace.RGB8).planes
            img = Image.fromarray(np.ascontiguousarray(rgb.transpose(1, 2, 0)), "RGB")
        img.save(path / f"{f.index:06d}.png")


# -- fidelity ----------------------------------------------------------------


@dataclass
class FidelityScore:
    per_frame_psnr: List[float]
    mean_psnr: float
    mse: List[float] = field(default_factory=list)


def psnr_value(mse: float) -> float:
    return math.inf if mse == 0 else 10.0 * math.log10(255.0 ** 2 / mse)


def psnr(reference: VideoClip, test: VideoClip) -> FidelityScore:
    """Per-frame PSNR over all samples.

    Identical frames report ``math.inf``. ``mean_psnr`` averages the frames
    that were actually altered and is ``inf`` only when nothing changed.
    """
    if len(reference) != len(test):
        raise DimensionError(f"frame counts differ: {len(reference)} vs {len(test)}")
    if len(reference) and (
        reference.colorspace != test.colorspace
        or (reference.width, reference.height) != (test.width, test.height)
    ):
        raise DimensionError("clips differ in dimensions or colour space")
    mse = [
        float(np.mean((a.planes.astype(np.float64) - b.planes.astype(np.float64)) ** 2))
        for a, b in zip(reference, test)
    ]
    per = [psnr_value(m) for m in mse]
    finite = [p for p in per if math.isfinite(p)]
    mean = float(np.mean(finite)) if finite else math.inf
    return FidelityScore(per, mean, mse)
