"""Checkpoint container: named tensor sections, f32 little-endian payloads.

Layout: magic ``EVCK`` | u32 version | u32 section count, then per section
u16 name length | utf-8 name | u8 ndim | ndim * u32 dims | f32 data.
Section names are grouped by prefix (embedder/, backbone/, lora/, norm/,
mask_token/, teacher/, head/).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

from evalign.errors import BadMagic, TruncatedFile

CKPT_MAGIC = b"EVCK"
CKPT_VERSION = 1


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(array, "<f4")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != CKPT_MAGIC:
        raise BadMagic("not a checkpoint file")
    _, count = struct.unpack_from("<II", data, 4)
    offset = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            arr = np.frombuffer(data, "<f4", size, offset).reshape(shape)
            offset += 4 * size
            out[name] = arr.astype(np.float32)
    except (struct.error, ValueError) as err:
        raise TruncatedFile(f"checkpoint ends early: {err}") from err
    return out


def _group(key: str) -> str:
    if key.startswith("embedder."):
        return "embedder"
    if key == "mask_token":
        return "mask_token"
    if "lora_A" in key or "lora_B" in key:
        return "lora"
    if key.startswith("core.norm."):
        return "norm"
    return "backbone"


def student_sections(model: nn.Module) -> dict[str, np.ndarray]:
    return {
        f"{_group(key)}/{key}": value.detach().cpu().numpy()
        for key, value in model.state_dict().items()
    }


def teacher_sections(teacher: nn.Module) -> dict[str, np.ndarray]:
    return {
        f"teacher/{key}": value.detach().cpu().numpy()
        for key, value in teacher.state_dict().items()
    }


def head_sections(head: nn.Module) -> dict[str, np.ndarray]:
    return {
        f"head/{key}": value.detach().cpu().numpy()
        for key, value in head.state_dict().items()
    }


def _strip_and_load(module: nn.Module, sections: dict[str, np.ndarray]) -> None:
    state = {}
    for name, array in sections.items():
        _, _, key = name.partition("/")
        state[key] = torch.from_numpy(np.ascontiguousarray(array))
    missing, unexpected = module.load_state_dict(state, strict=True), None
    del missing, unexpected


def load_student(model: nn.Module, path: str | Path) -> None:
    sections = {
        k: v for k, v in load_tensors(path).items() if not k.startswith("teacher/")
        and not k.startswith("head/")
    }
    _strip_and_load(model, sections)


def load_teacher(teacher: nn.Module, path: str | Path) -> None:
    sections = {
        k: v for k, v in load_tensors(path).items() if k.startswith("teacher/")
    }
    _strip_and_load(teacher, sections)


def load_head(head: nn.Module, path: str | Path) -> None:
    sections = {
        k: v for k, v in load_tensors(path).items() if k.startswith("head/")
    }
    _strip_and_load(head, sections)
