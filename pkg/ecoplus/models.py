from __future__ import annotations
import math
from enum import Enum
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

GRAVITY = 9.8066


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RoadSpec(_Frozen):
    length: float = Field(100.0, gt=0, description="segment length L [m]")
    slope: float = Field(0.0, description="constant road slope theta [rad]")
    gravity: float = Field(GRAVITY, gt=0, description="g [m/s^2]")

    @model_validator(mode="after")
    def _slope_range(self):
        if abs(self.slope) >= math.pi / 2:
            raise ValueError("|slope| must be below pi/2")
        return self


class BoundarySpec(_Frozen):
    v0: float = Field(8.0, ge=0, description="initial velocity [m/s]")
    vd: float = Field(8.0, ge=0, description="terminal velocity [m/s]")
    tm: float = Field(18.0, gt=0, description="travel time [s]")
    # False only for internal segments that start or end at standstill
    zero_boundary_control: bool = True


class Limits(_Frozen):
    v_max: float = Field(15.0, gt=0)
    u_min: float = Field(-3.5, lt=0)
    u_max: float = Field(2.5, gt=0)
    j_min: float = Field(-10.0, lt=0)
    j_max: float = Field(10.0, gt=0)
    a_min: Optional[float] = Field(None, lt=0)
    a_max: Optional[float] = Field(None, gt=0)

    def with_comfort(self, j_min: float, j_max: float, a_min: float, a_max: float) -> "Limits":
        return self.model_copy(update={"j_min": j_min, "j_max": j_max, "a_min": a_min, "a_max": a_max})


class ResistanceCoefficients(_Frozen):
    """Equivalent deceleration a^r(v) = d1 + d2*v + d3*v^2."""
    d1: float
    d2: float
    d3: float = Field(..., gt=0)

    def decel(self, v):
        return self.d1 + self.d2 * v + self.d3 * np.square(v)

    def slope(self, v):
        return self.d2 + 2.0 * self.d3 * v


class CpemParams(_Frozen):
    family: Literal["cpem"] = "cpem"
    c1: float = 0.0328
    c2: float = 4.575
    c_r: float = 1.75
    rho: float = Field(1.2256, gt=0)
    area: float = Field(2.3316, gt=0)
    drag_coefficient: float = Field(0.28, gt=0)
    # not published with the other coefficients; reference Nissan Leaf value
    mass: float = Field(1521.0, gt=0)
    eta_d: float = Field(0.92, gt=0, le=1)
    eta_em: float = Field(0.91, gt=0, le=1)
    eta_b: float = Field(0.9, gt=0, le=1)
    regen_coefficient: float = Field(0.0411, gt=0)


class KmmkParams(_Frozen):
    family: Literal["kmmk"] = "kmmk"
    c0: float = 0.1569
    c1: float = 0.0245
    c2: float = -7.415e-4
    c3: float = 5.975e-5
    c4: float = 0.07224
    c5: float = 0.09681
    c6: float = 1.075e-3
    mass: float = Field(1200.0, gt=0)
    rho: float = Field(1.184, gt=0)
    drag_coefficient: float = Field(0.32, ge=0)
    area: float = Field(2.5, gt=0)
    mu: float = Field(0.015, ge=0)
    u_max: float = Field(2.5, gt=0)


VehicleModelParams = Annotated[Union[CpemParams, KmmkParams], Field(discriminator="family")]


class StrategyKind(str, Enum):
    ECO_PLUS = "ecoplus"
    VM = "vm"
    JM = "jm"
    AM = "am"
    DC_SURROGATE = "dc"
    VM_L1 = "vm_l1"
    AM_L1 = "am_l1"
    VA = "va"
    UM = "um"


class PwaMode(str, Enum):
    PWA = "pwa"
    FINE_PWA_ORACLE = "oracle"


class Strategy(_Frozen):
    kind: StrategyKind
    mode: PwaMode = PwaMode.PWA

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.ECO_PLUS and self.mode is PwaMode.FINE_PWA_ORACLE:
            return "ecoplus-oracle"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        t = text.strip().lower().replace("+", "plus").replace("_oracle", "-oracle")
        if t in ("ecoplus-oracle", "oracle"):
            return cls(kind=StrategyKind.ECO_PLUS, mode=PwaMode.FINE_PWA_ORACLE)
        try:
            return cls(kind=StrategyKind(t))
        except ValueError:
            known = ", ".join([k.value for k in StrategyKind] + ["ecoplus-oracle"])
            raise ValueError(f"unknown strategy '{text}' (expected one of: {known})") from None


def horizon_steps(tm: float, dt: float) -> int:
    """H = ceil(tm/dt), tolerant to float noise such as 18/0.1."""
    if dt <= 0 or tm <= 0:
        raise ValueError("tm and dt must be positive")
    return max(1, int(math.ceil(tm / dt - 1e-9)))
