"""Preset auto-discovery and registry."""

from __future__ import annotations

import importlib
import importlib.util
import logging
import sys
from pathlib import Path
from typing import Type

from fdtransport.presets.base import BasePreset, InitialPreset, VelocityPreset

logger = logging.getLogger(__name__)

_REGISTRY: dict[str, dict[str, Type[BasePreset]]] = {"velocity": {}, "initial": {}}

USER_PRESET_DIR = Path(__file__).parent.parent.parent / "user_presets"


def register_preset(cls: Type[BasePreset]) -> Type[BasePreset]:
    """Decorator to register a preset class."""
    instance = cls()
    _REGISTRY[instance.kind][instance.name] = cls
    logger.debug(f"Registered {instance.kind} preset: {instance.name}")
    return cls


def _get(kind: str, name: str) -> BasePreset:
    if not _REGISTRY[kind]:
        auto_discover()
    if name not in _REGISTRY[kind]:
        raise KeyError(f"{kind.capitalize()} preset '{name}' not found. Available: {sorted(_REGISTRY[kind])}")
    return _REGISTRY[kind][name]()


def get_velocity_preset(name: str) -> VelocityPreset:
    return _get("velocity", name)


def get_initial_preset(name: str) -> InitialPreset:
    return _get("initial", name)


def list_presets(kind: str | None = None) -> list[dict]:
    """List registered presets, optionally of one kind."""
    result = []
    for k, entries in _REGISTRY.items():
        if kind is not None and k != kind:
            continue
        for cls in entries.values():
            p = cls()
            result.append({
                "name": p.name,
                "kind": p.kind,
                "description": p.description,
                "smooth": p.smooth,
                "steady": getattr(p, "steady", None),
                "parameters": [
                    {
                        "name": q.name,
                        "type": q.type,
                        "default": q.default,
                        "min": q.min_val,
                        "max": q.max_val,
                        "description": q.description,
                    }
                    for q in p.parameters()
                ],
            })
    return sorted(result, key=lambda d: (d["kind"], d["name"]))


def auto_discover(user_dir: Path | None = None):
    """Import built-in presets to trigger @register_preset, then user presets."""
    builtin_dir = Path(__file__).parent / "builtin"
    for py_file in sorted(builtin_dir.glob("*.py")):
        if py_file.name.startswith("_"):
            continue
        module_name = f"fdtransport.presets.builtin.{py_file.stem}"
        try:
            importlib.import_module(module_name)
        except Exception as e:
            logger.warning(f"Failed to load preset module {module_name}: {e}")

    user_dir = user_dir or USER_PRESET_DIR
    if user_dir.exists():
        for py_file in sorted(user_dir.glob("*.py")):
            if py_file.name.startswith("_"):
                continue
            spec = importlib.util.spec_from_file_location(py_file.stem, py_file)
            if spec and spec.loader:
                mod = importlib.util.module_from_spec(spec)
                sys.modules[py_file.stem] = mod
                try:
                    spec.loader.exec_module(mod)
                except Exception as e:
                    logger.warning(f"Failed to load user preset {py_file.name}: {e}")
