"""Shared plumbing: dataclass configs become command-line flags."""

from __future__ import annotations

import argparse
import dataclasses
import json
from pathlib import Path


def parse_into(cls, description: str):
    """Build ``cls`` from ``--field value`` flags, defaults taken from the dataclass."""
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, bool):
            p.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, (list, tuple)):
            kind = type(default[0]) if default else float
            p.add_argument(flag, nargs="+", type=kind, default=list(default))
        else:
            p.add_argument(flag, type=type(default), default=default)
    return cls(**vars(p.parse_args()))


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
