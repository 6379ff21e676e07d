"""Named BB code presets with their reference parameters."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .bbcode import BBCode, BBCodeSpec, build_code


@dataclass(frozen=True)
class Preset:
    name: str
    spec_text: str
    n: int
    k: int
    d: int
    embedding: tuple[int, int, int, int]
    mask_percent: float
    steps_short: int
    steps_long: int
    listed_embedding: tuple[int, int, int, int] | None = None

    @property
    def spec(self) -> BBCodeSpec:
        return BBCodeSpec.parse(self.spec_text)

    @property
    def label(self) -> str:
        return f"[[{self.n},{self.k},{self.d}]]"


PRESETS: dict[str, Preset] = {
    p.name: p
    for p in [
        Preset("bb72", "ell=12 m=3 A=x9+y1+y2 B=1+x1+x11", 72, 8, 6, (2, 3, 1, 2), 25.0, 11, 6),
        Preset("bb90", "ell=9 m=5 A=x8+y4+y1 B=y5+x8+x7", 90, 8, 6, (2, 3, 2, 1), 22.22, 9, 5),
        Preset("bb120", "ell=12 m=5 A=x10+y4+y1 B=1+x1+x2", 120, 8, 8, (2, 3, 1, 2), 25.0, 11, 6),
        Preset("bb150", "ell=15 m=5 A=x5+y2+y3 B=y2+x7+x6", 150, 8, 8, (1, 2, 1, 3), 26.66, 11, 6),
        Preset("bb144", "ell=12 m=6 A=x3+y1+y2 B=y3+x1+x2", 144, 12, 12, (2, 1, 1, 3), 33.33, 12, 8),
        # the reference embedding (2,3,1,2) is not a toric layout of this code;
        # (2,3,3,2) uses the same A pair and reproduces the reference mask percent
        Preset("bb196", "ell=14 m=7 A=x6+y5+y6 B=1+x4+x13", 196, 12, 8, (2, 3, 3, 2), 35.71, 16, 15,
               listed_embedding=(2, 3, 1, 2)),
    ]
}

ALIASES = {"gross": "bb144"}

EXTRA_CODES = {
    "bb42": "ell=7 m=3 A=1+y2+y1 B=1+x5+x1",
    "bb36": "ell=6 m=3 A=x1+y3+y2 B=y3+x5+x4",
}


def get_preset(name: str) -> Preset:
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(ALIASES)}")
    return PRESETS[key]


@lru_cache(maxsize=None)
def preset_code(name: str) -> BBCode:
    if name in EXTRA_CODES:
        return build_code(BBCodeSpec.parse(EXTRA_CODES[name]))
    return build_code(get_preset(name).spec)
