"""Device power profiles and the linear power law.

Every powered device (networking and processing) is described by a maximum
power, an idle power and a capacity.  Power consumption is affine in the
carried load: ``idle + slope * load`` while active, zero while off, with
``slope = (max - idle) / capacity``.  Slopes are always derived from the
max/idle/capacity triple; they are never configured directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class DeviceRole(str, Enum):
    """Catalog key for every powered device role."""

    AP_RED = "ap_red"
    AP_YELLOW = "ap_yellow"
    AP_GREEN = "ap_green"
    AP_BLUE = "ap_blue"
    ONU = "onu"
    ETHERNET_SWITCH = "ethernet_switch"
    AGGREGATION_SWITCH = "aggregation_switch"
    EDGE_ROUTER = "edge_router"
    OPTICAL_SWITCH = "optical_switch"
    CORE_ROUTER = "core_router"
    CLOUD_SERVER = "cloud_server"
    MFS = "mfs"
    CFS = "cfs"
    BFS = "bfs"
    RFS = "rfs"
    USER_DEVICE = "user_device"
    LEAF_SWITCH = "leaf_switch"
    SPINE_SWITCH = "spine_switch"
    SL_ROUTER = "sl_router"
    ETHERNET_INTERFACE = "ethernet_interface"


class PowerModelError(ValueError):
    """Invalid profile data or load outside the profile's domain."""


@dataclass(frozen=True)
class PowerProfile:
    """(max, idle, capacity) triple with the derived per-unit slope.

    ``capacity`` is in Gbps for networking devices and GFLOPs for
    processing nodes; ``slope`` is watts per capacity unit.
    """

    p_max: float
    p_idle: float
    capacity: float

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise PowerModelError(f"capacity must be positive, got {self.capacity}")
        if not (self.p_max >= self.p_idle >= 0):
            raise PowerModelError(
                f"need p_max >= p_idle >= 0, got ({self.p_max}, {self.p_idle})"
            )

    @property
    def slope(self) -> float:
        """Watts per device unit on the proportional part."""
        return (self.p_max - self.p_idle) / self.capacity


# (max W, idle W, capacity) per role.  Idle is 60% of max throughout.
_DEFAULT_ENTRIES: dict[DeviceRole, tuple[float, float, float]] = {
    DeviceRole.AP_RED: (7.2, 4.32, 2.5),
    DeviceRole.AP_YELLOW: (4.5, 2.7, 2.5),
    DeviceRole.AP_GREEN: (2.7, 1.62, 2.5),
    DeviceRole.AP_BLUE: (2.7, 1.62, 2.25),
    DeviceRole.ONU: (15.0, 9.0, 10.0),
    DeviceRole.ETHERNET_SWITCH: (300.0, 180.0, 160.0),
    DeviceRole.AGGREGATION_SWITCH: (435.0, 261.0, 240.0),
    DeviceRole.EDGE_ROUTER: (435.0, 261.0, 240.0),
    DeviceRole.OPTICAL_SWITCH: (750.0, 450.0, 480.0),
    DeviceRole.CORE_ROUTER: (344.0, 206.4, 3200.0),
    DeviceRole.CLOUD_SERVER: (1100.0, 660.0, 1612.8),
    DeviceRole.MFS: (750.0, 450.0, 403.2),
    DeviceRole.CFS: (350.0, 210.0, 121.6),
    DeviceRole.BFS: (305.0, 183.0, 99.0),
    DeviceRole.RFS: (65.0, 39.0, 64.0),
    DeviceRole.USER_DEVICE: (18.0, 10.8, 12.288),
    DeviceRole.LEAF_SWITCH: (508.0, 304.8, 480.0),
    DeviceRole.SPINE_SWITCH: (660.0, 396.0, 1440.0),
    DeviceRole.SL_ROUTER: (344.0, 206.4, 3200.0),
    DeviceRole.ETHERNET_INTERFACE: (5.0, 3.0, 10.0),
}


class DeviceCatalog:
    """Immutable mapping from device role to its power profile."""

    def __init__(self, entries: dict[DeviceRole, PowerProfile]):
        self._entries = dict(entries)

    def __getitem__(self, role: DeviceRole) -> PowerProfile:
        return self._entries[role]

    def __contains__(self, role: DeviceRole) -> bool:
        return role in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def roles(self) -> tuple[DeviceRole, ...]:
        return tuple(self._entries)

    def items(self):
        return self._entries.items()


def default_catalog() -> DeviceCatalog:
    """Built-in catalog covering all twenty powered device roles."""
    return DeviceCatalog(
        {role: PowerProfile(*vals) for role, vals in _DEFAULT_ENTRIES.items()}
    )


def catalog_with_overrides(source: str | Path | dict) -> DeviceCatalog:
    """Catalog with per-role overrides from a config file or dict.

    The file is JSON: ``{"rfs": {"max_w": 65, "idle_w": 39, "capacity": 64}}``.
    Roles absent from the config keep their defaults.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    entries = {role: PowerProfile(*vals) for role, vals in _DEFAULT_ENTRIES.items()}
    for key, spec in data.items():
        try:
            role = DeviceRole(key)
        except ValueError as exc:
            raise PowerModelError(f"unknown device role {key!r}") from exc
        try:
            entries[role] = PowerProfile(
                float(spec["max_w"]), float(spec["idle_w"]), float(spec["capacity"])
            )
        except KeyError as exc:
            raise PowerModelError(
                f"override for {key!r} needs max_w, idle_w and capacity"
            ) from exc
    return DeviceCatalog(entries)


def device_power(profile: PowerProfile, load: float, active: bool = True) -> float:
    """Power draw of a device at the given load.

    Active devices consume ``p_idle + slope * load``; inactive devices
    consume nothing and must carry no load.
    """
    if load < 0:
        raise PowerModelError(f"negative load {load}")
    if not active:
        if load > 0:
            raise PowerModelError(f"inactive device cannot carry load {load}")
        return 0.0
    if load > profile.capacity * (1 + 1e-12):
        raise PowerModelError(
            f"load {load} exceeds capacity {profile.capacity}"
        )
    return profile.p_idle + profile.slope * load
