"""
Scenario files.

A scenario is a YAML mapping. Only ``carrier_frequency``,
``antenna_length`` and ``users`` are required; see the README for the
full schema. Powers may be given in watts (``p_max``, ``noise_power``)
or in dBm (``p_max_dbm``, ``noise_power_dbm``); they are converted to
watts here and nowhere else.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from ..channel import (ArchitectureKind, ArrayGeometry, DmaParams, fraunhofer_distance,
                       fresnel_distance, wavelength_from_frequency)
from ..errors import ParseError, ValidationError

__all__ = [
    "Scenario", "ArchitectureConfig", "load_scenario", "parse_scenario", "dbm_to_watts",
    "DEFAULT_P_MAX_DBM", "DEFAULT_NOISE_DBM", "OUTPUT_KINDS", "scenario_to_dict",
]

DEFAULT_P_MAX_DBM = -13.0
DEFAULT_NOISE_DBM = -114.0
OUTPUT_KINDS = ("rate_curve", "power_map", "sum_rate_table")

# element spacing in wavelengths
_DEFAULT_SPACING = {"fd": 0.5, "hybrid": 0.5, "dma": 0.2}
_SOLVER_DEFAULTS = {
    "fd": {"max_iters": 500, "tol": 1e-8},
    "hybrid": {"n_rf": None, "outer_rounds": 20, "inner_iters": 200, "grad_tol": 1e-6},
    "dma": {"alpha": 0.6, "beta": 827.67, "outer_rounds": 10, "inner_iters": 50},
}
_TOP_KEYS = {
    "carrier_frequency", "antenna_length", "users", "user_units", "p_max", "p_max_dbm",
    "noise_power", "noise_power_dbm", "boresight_b", "architectures", "outputs", "seed",
    "rate_curve", "power_map", "sweep",
}


def dbm_to_watts(dbm):
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


@dataclass
class ArchitectureConfig:
    """Array layout and solver options of one architecture.

    ``spacing`` is the element spacing in wavelengths (rows and columns).
    """

    kind: ArchitectureKind
    spacing: float
    options: dict = field(default_factory=dict)

    def geometry(self, length, wavelength):
        step = self.spacing * wavelength
        n_rf = self.options.get("n_rf") if self.kind is ArchitectureKind.HYBRID else None
        return ArrayGeometry.for_aperture(length, step, step, self.kind, n_rf)

    def dma_params(self, geometry):
        return DmaParams.from_geometry(geometry, self.options["alpha"], self.options["beta"])


@dataclass
class Scenario:
    """Validated scenario in SI units; user positions in meters, shape ``(M, 3)``."""

    carrier_frequency: float
    antenna_length: float
    users: np.ndarray
    p_max: float
    noise_power: float
    boresight_b: float = 2.0
    architectures: dict = field(default_factory=dict)
    outputs: tuple = OUTPUT_KINDS
    seed: int = 0
    rate_curve: dict = field(default_factory=dict)
    power_map: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict, repr=False)

    @property
    def wavelength(self):
        return wavelength_from_frequency(self.carrier_frequency)

    @property
    def aperture_diameter(self):
        """Diagonal of the square aperture, used for the region boundaries."""
        return float(np.sqrt(2.0) * self.antenna_length)

    @property
    def fraunhofer(self):
        return fraunhofer_distance(self.aperture_diameter, self.wavelength)

    @property
    def fresnel(self):
        return fresnel_distance(self.aperture_diameter, self.wavelength)

    def geometry(self, arch):
        return self.architectures[arch].geometry(self.antenna_length, self.wavelength)

    def digest(self):
        """SHA-256 of the canonical JSON form of the parsed scenario."""
        payload = json.dumps(self.source, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def with_users(self, users):
        copy = Scenario(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        copy.users = np.atleast_2d(np.asarray(users, dtype=float))
        return copy

    def summary(self):
        """Region boundaries and per-architecture element counts."""
        rows = {
            "wavelength": self.wavelength,
            "fresnel_distance": self.fresnel,
            "fraunhofer_distance": self.fraunhofer,
        }
        for name, cfg in self.architectures.items():
            g = cfg.geometry(self.antenna_length, self.wavelength)
            rows[f"{name}.n_rows"] = g.n_rows
            rows[f"{name}.n_cols"] = g.n_cols
            rows[f"{name}.n_elements"] = g.n_elements
            if g.n_rf is not None:
                rows[f"{name}.n_rf"] = g.n_rf
        return rows


def _number(raw, name, positive=True, allow_zero=False):
    if isinstance(raw, str):
        # YAML 1.1 reads exponents without a sign ("28.0e9") as strings
        try:
            raw = float(raw)
        except ValueError:
            pass
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ParseError(f"field '{name}': expected a number, got {raw!r}")
    value = float(raw)
    if not np.isfinite(value):
        raise ValidationError(name, "must be finite")
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        raise ValidationError(name, f"must be {'nonnegative' if allow_zero else 'positive'}, got {value}")
    return value


def _power(data, name, default_dbm):
    if name in data and f"{name}_dbm" in data:
        raise ParseError(f"fields '{name}' and '{name}_dbm' are mutually exclusive")
    if name in data:
        return _number(data[name], name)
    dbm = _number(data.get(f"{name}_dbm", default_dbm), f"{name}_dbm", positive=False)
    return dbm_to_watts(dbm)


def _users(raw, units, fraunhofer):
    if not isinstance(raw, list) or not raw:
        raise ValidationError("users", "at least one user position is required")
    rows = []
    for k, item in enumerate(raw):
        if isinstance(item, dict):
            unknown = set(item) - {"x", "y", "z"}
            if unknown:
                raise ParseError(f"field 'users[{k}]': unknown keys {sorted(unknown)}")
            item = [item.get("x", 0.0), item.get("y", 0.0), item.get("z")]
        if not isinstance(item, list) or len(item) != 3:
            raise ParseError(f"field 'users[{k}]': expected [x, y, z] or a mapping with x, y, z")
        coords = [_number(c, f"users[{k}]", positive=False) for c in item]
        if coords[2] <= 0:
            raise ValidationError(f"users[{k}]", "receivers must lie in front of the array (z > 0)")
        rows.append(coords)
    users = np.array(rows, dtype=float)
    if units == "fraunhofer":
        users = users * fraunhofer
    elif units != "m":
        raise ParseError(f"field 'user_units': expected 'm' or 'fraunhofer', got {units!r}")
    return users


def _architectures(raw):
    if raw is None:
        raw = {name: {} for name in _DEFAULT_SPACING}
    if not isinstance(raw, dict) or not raw:
        raise ParseError("field 'architectures': expected a non-empty mapping")
    out = {}
    for name, entry in raw.items():
        if name not in _DEFAULT_SPACING:
            raise ParseError(f"field 'architectures.{name}': unknown architecture (fd, hybrid, dma)")
        entry = dict(entry or {})
        spacing = _number(entry.pop("spacing", _DEFAULT_SPACING[name]), f"architectures.{name}.spacing")
        options = dict(_SOLVER_DEFAULTS[name])
        for key, value in entry.items():
            if key not in options:
                raise ParseError(f"field 'architectures.{name}.{key}': unknown option")
            options[key] = value
        for key, value in options.items():
            if value is None:
                continue
            path = f"architectures.{name}.{key}"
            number = _number(value, path, allow_zero=(key == "alpha"))
            options[key] = int(number) if key in ("max_iters", "n_rf", "outer_rounds", "inner_iters") else number
        out[name] = ArchitectureConfig(ArchitectureKind(name), spacing, options)
    return out


def parse_scenario(data):
    """Build a :class:`Scenario` from an already-loaded mapping."""
    if not isinstance(data, dict):
        raise ParseError("scenario must be a mapping at the top level")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown top-level fields {sorted(unknown)}")
    for key in ("carrier_frequency", "antenna_length", "users"):
        if key not in data:
            raise ParseError(f"field '{key}' is required")
    frequency = _number(data["carrier_frequency"], "carrier_frequency")
    length = _number(data["antenna_length"], "antenna_length")
    wavelength = wavelength_from_frequency(frequency)
    fraunhofer = fraunhofer_distance(np.sqrt(2.0) * length, wavelength)
    users = _users(data["users"], data.get("user_units", "m"), fraunhofer)
    outputs = data.get("outputs", list(OUTPUT_KINDS))
    if not isinstance(outputs, list) or any(o not in OUTPUT_KINDS for o in outputs):
        raise ParseError(f"field 'outputs': expected a list drawn from {list(OUTPUT_KINDS)}")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValidationError("seed", "must be an integer in [0, 2^64)")
    sections = {}
    for key in ("rate_curve", "power_map", "sweep"):
        section = data.get(key) or {}
        if not isinstance(section, dict):
            raise ParseError(f"field '{key}': expected a mapping")
        sections[key] = section
    scenario = Scenario(
        carrier_frequency=frequency,
        antenna_length=length,
        users=users,
        p_max=_power(data, "p_max", DEFAULT_P_MAX_DBM),
        noise_power=_power(data, "noise_power", DEFAULT_NOISE_DBM),
        boresight_b=_number(data.get("boresight_b", 2.0), "boresight_b", allow_zero=True),
        architectures=_architectures(data.get("architectures")),
        outputs=tuple(outputs),
        seed=seed,
        source=data,
        **sections,
    )
    for name in scenario.architectures:
        g = scenario.geometry(name)
        if g.n_elements < 1:
            raise ValidationError(f"architectures.{name}.spacing", "aperture holds no elements")
    return scenario


def load_scenario(path):
    """Read and validate a scenario file.

    Raises
    ------
    ParseError
        Malformed YAML (with line and column) or wrong field types.
    ValidationError
        Physically meaningless values; ``.field`` names the offending key.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ParseError(f"{path}: {exc.problem}{where}") from None
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_scenario(data)


def scenario_to_dict(scenario):
    """Plain-data view of a scenario (for manifests)."""
    out = {k: v for k, v in asdict(scenario).items() if k != "source"}
    out["users"] = scenario.users.tolist()
    out["architectures"] = {
        name: {"spacing": cfg.spacing, **cfg.options} for name, cfg in scenario.architectures.items()
    }
    out["outputs"] = list(scenario.outputs)
    return out
