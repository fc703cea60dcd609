"""Family and level descriptors for the SU(2)_k and Jones-Kauffman theories."""

from __future__ import annotations

import cmath
import math
from enum import Enum
from fractions import Fraction
from typing import List, Union

from pydantic import BaseModel, ConfigDict, Field


class Family(str, Enum):
    """Supported anyon model families."""

    SU2 = "SU2"
    JK = "JK"
    SU2_CONJUGATE = "SU2-conjugate"
    JK_CONJUGATE = "JK-conjugate"

    @property
    def base(self) -> "Family":
        if self is Family.SU2_CONJUGATE:
            return Family.SU2
        if self is Family.JK_CONJUGATE:
            return Family.JK
        return self

    @property
    def is_conjugate(self) -> bool:
        return self in (Family.SU2_CONJUGATE, Family.JK_CONJUGATE)

    def conjugate(self) -> "Family":
        return {
            Family.SU2: Family.SU2_CONJUGATE,
            Family.JK: Family.JK_CONJUGATE,
            Family.SU2_CONJUGATE: Family.SU2,
            Family.JK_CONJUGATE: Family.JK,
        }[self]

    @classmethod
    def parse(cls, name: str, *, conjugate: bool = False) -> "Family":
        token = name.strip().lower().replace("_", "-")
        aliases = {
            "su2": cls.SU2,
            "su(2)": cls.SU2,
            "jk": cls.JK,
            "su2-conjugate": cls.SU2_CONJUGATE,
            "jk-conjugate": cls.JK_CONJUGATE,
        }
        if token not in aliases:
            raise ValueError(f"Unknown family '{name}'")
        family = aliases[token]
        return family.conjugate() if conjugate else family


class TheorySpec(BaseModel):
    """Family plus level. Deformation parameters are always derived."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Family
    level: int = Field(ge=1)

    @classmethod
    def jk(cls, level: int) -> "TheorySpec":
        return cls(family=Family.JK, level=level)

    @classmethod
    def su2(cls, level: int) -> "TheorySpec":
        return cls(family=Family.SU2, level=level)

    @property
    def charges(self) -> List[int]:
        return list(range(self.level + 1))

    @property
    def r(self) -> int:
        """Shifted level k+2 appearing in every closed form."""

        return self.level + 2

    @property
    def q(self) -> complex:
        value = cmath.exp(2j * math.pi / self.r)
        return value.conjugate() if self.family.is_conjugate else value

    @property
    def A(self) -> complex:
        value = 1j * cmath.exp(-1j * math.pi / (2 * self.r))
        return value.conjugate() if self.family.is_conjugate else value

    def conjugate(self) -> "TheorySpec":
        return TheorySpec(family=self.family.conjugate(), level=self.level)

    def validate_charge(self, value: int) -> int:
        if not isinstance(value, (int,)) or isinstance(value, bool):
            raise ValueError(f"Charge label must be an integer, got {value!r}")
        if value < 0 or value > self.level:
            raise ValueError(f"Charge {value} outside 0..{self.level}")
        return value

    @property
    def label(self) -> str:
        return f"{self.family.value}_{self.level}"


def spin_to_label(spin: Union[Fraction, float, int, str]) -> int:
    """Translate an SU(2) spin j into the integer charge label 2j."""

    doubled = Fraction(spin) * 2
    if doubled.denominator != 1 or doubled < 0:
        raise ValueError(f"Spin {spin} is not a non-negative half-integer")
    return int(doubled)


def label_to_spin(label: int) -> Fraction:
    """Translate an integer charge label back into the SU(2) spin."""

    if label < 0:
        raise ValueError(f"Charge {label} is negative")
    return Fraction(label, 2)
