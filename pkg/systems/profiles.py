from __future__ import annotations
from dataclasses import fields, replace
from typing import Any, Dict, Literal

from settings import NumericsSettings
from systems.errors import ConfigError

# Type alias for accuracy profiles
ProfileName = Literal["fast", "standard", "strict"]
PROFILE_NAMES: tuple[str, ...] = ("fast", "standard", "strict")


class ProfileManager:
    """
    Manages the accuracy profiles shared by all experiments.

    Profiles:
    - fast: coarse grids and fewer modes, for smoke runs
    - standard: the documented defaults
    - strict: finer grids, more modes, tighter quadrature tolerance
    """

    # Base values (standard profile)
    BASE: Dict[str, Any] = {f.name: f.default for f in fields(NumericsSettings)}

    # Profile modifiers (replace base values)
    MODIFIERS: Dict[ProfileName, Dict[str, Any]] = {
        "fast": {
            "n_max": 32,
            "steps_per_unit": 256,
            "ray_order": 12,
            "arc_order": 48,
            "contour_tol": 1e-8,
            "sector_moduli": 24,
            "sector_fan": 8,
        },
        "standard": {},
        "strict": {
            "n_max": 128,
            "steps_per_unit": 1024,
            "ray_order": 24,
            "arc_order": 96,
            "refine_levels": 4,
            "contour_tol": 1e-12,
            "sector_moduli": 60,
            "sector_fan": 16,
        },
    }

    def __init__(self):
        self._current: ProfileName = "standard"
        self._cache: Dict[str, NumericsSettings] = {}

    @property
    def current(self) -> ProfileName:
        return self._current

    @current.setter
    def current(self, value: ProfileName) -> None:
        if value in PROFILE_NAMES:
            self._current = value

    def get(self, name: str | None = None, **overrides: Any) -> NumericsSettings:
        name = name or self._current
        if name not in PROFILE_NAMES:
            raise ConfigError(f"unknown profile {name!r}; expected one of {', '.join(PROFILE_NAMES)}")
        if name not in self._cache:
            values = dict(self.BASE)
            values.update(self.MODIFIERS[name])
            self._cache[name] = NumericsSettings(**values)
        settings = self._cache[name]
        return replace(settings, **overrides) if overrides else settings


_manager = ProfileManager()


def get_profile(name: str | None = None, **overrides: Any) -> NumericsSettings:
    return _manager.get(name, **overrides)


def set_profile(name: ProfileName) -> None:
    if name not in PROFILE_NAMES:
        raise ConfigError(f"unknown profile {name!r}")
    _manager.current = name
