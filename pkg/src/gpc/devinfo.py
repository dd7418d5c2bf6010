"""Compute-device inventory reported to clients as XML.

Document shape (no whitespace between elements)::

    <?xml version="1.0"?><gpgpu_server><device index="0"><name>...</name>
    ... one element per DeviceInfo field, in field order ...</device></gpgpu_server>

The grid/thread triples are written as space separated integers. Fields
a host cannot report are 0 (numbers) or ``n/a`` (strings), never omitted.
"""

from __future__ import annotations

import os
import platform
import re
from dataclasses import astuple, dataclass, fields
from typing import Callable, Iterable
from xml.sax.saxutils import escape

NA = "n/a"
XML_DECL = '<?xml version="1.0"?>'


@dataclass(frozen=True)
class DeviceInfo:
    name: str = NA
    compute_capability: str = NA
    warp_size: int = 0
    total_constant_memory: int = 0
    total_global_memory: int = 0
    shared_memory_per_block: int = 0
    clock_rate_khz: int = 0
    multi_processor_count: int = 0
    registers_per_block: int = 0
    max_threads_per_block: int = 0
    max_grid_size: tuple[int, int, int] = (0, 0, 0)
    max_threads_dim: tuple[int, int, int] = (0, 0, 0)


ATTRIBUTES = tuple(f.name for f in fields(DeviceInfo))

Prober = Callable[[], Iterable[DeviceInfo]]


def _cpuinfo() -> dict[str, str]:
    info: dict[str, str] = {}
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                key, sep, value = line.partition(":")
                if sep:
                    info.setdefault(key.strip(), value.strip())
    except OSError:
        pass
    return info


def _physical_memory() -> int:
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return 0


def host_prober() -> list[DeviceInfo]:
    """The host CPU as a single device; GPU-only fields left at sentinels."""
    cpu = _cpuinfo()
    name = cpu.get("model name") or platform.processor() or platform.machine() or NA
    try:
        clock_khz = int(float(cpu.get("cpu MHz", "0")) * 1000)
    except ValueError:
        clock_khz = 0
    return [
        DeviceInfo(
            name=name,
            clock_rate_khz=clock_khz,
            multi_processor_count=os.cpu_count() or 1,
            total_global_memory=_physical_memory(),
        )
    ]


def probe_devices(prober: Prober | None = None) -> list[DeviceInfo]:
    prober = prober or host_prober
    try:
        return list(prober())
    except Exception:
        return []


# characters XML 1.0 cannot carry at all
_ILLEGAL = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ufffe\uffff\ud800-\udfff]")


def _text(value) -> str:
    if isinstance(value, tuple):
        return " ".join(str(int(v)) for v in value)
    text = _ILLEGAL.sub("?", str(value))
    return escape(text, {"\r": "&#13;"})


def to_xml(devices: Iterable[DeviceInfo]) -> bytes:
    devices = list(devices)
    if not devices:
        return (XML_DECL + "<gpgpu_server/>").encode("utf-8")
    parts = [XML_DECL, "<gpgpu_server>"]
    for i, dev in enumerate(devices):
        parts.append(f'<device index="{i}">')
        for tag, value in zip(ATTRIBUTES, astuple(dev)):
            parts.append(f"<{tag}>{_text(value)}</{tag}>")
        parts.append("</device>")
    parts.append("</gpgpu_server>")
    return "".join(parts).encode("utf-8")


def format_tree(xml_bytes: bytes) -> str:
    """Indented text rendering of a device document, for terminals."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(xml_bytes)
    lines = [root.tag]
    for dev in root:
        lines.append(f"  device {dev.get('index')}")
        for attr in dev:
            lines.append(f"    {attr.tag}: {attr.text or ''}")
    return "\n".join(lines)
