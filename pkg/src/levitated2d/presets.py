"""Parameter sets of the three published data sets, as Hz-quoted records.

The detuning of the 22.5 V set is not quoted; it is taken equal to the 0 V set.
"""

from .errors import ValidationError
from .model import SystemParams

_COMMON = {"kappa_hz": 57e3, "eta": 0.32, "gamma_gas_x": 1e-4, "gamma_gas_y": 1e-4, "lo_hz": 900e3}

RECORDS = {
    "0V": {**_COMMON, "omega_x_hz": 122170.0, "omega_y_hz": 109370.0, "g_x_hz": 14130.0,
           "g_y_hz": 10370.0, "Gamma_x_hz": 4030.0, "Gamma_y_hz": 3050.0, "detuning_hz": -111e3},
    "22.5V": {**_COMMON, "omega_x_hz": 122290.0, "omega_y_hz": 108970.0, "g_x_hz": 14420.0,
              "g_y_hz": 10300.0, "Gamma_x_hz": 3890.0, "Gamma_y_hz": 2990.0, "detuning_hz": -111e3},
    "35V": {**_COMMON, "omega_x_hz": 121610.0, "omega_y_hz": 107640.0, "g_x_hz": 15160.0,
            "g_y_hz": 10060.0, "Gamma_x_hz": 3250.0, "Gamma_y_hz": 2520.0, "detuning_hz": -110e3},
}


def preset(name: str = "0V") -> SystemParams:
    if name not in RECORDS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(RECORDS)}")
    return SystemParams.from_hz(RECORDS[name])


def table1() -> SystemParams:
    return preset("0V")
