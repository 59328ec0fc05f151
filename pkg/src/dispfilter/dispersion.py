"""Platform registry, bulk Sellmeier group indices and propagation bookkeeping.

Units: wavelengths in nm, propagation lengths in m, losses in dB/cm, times in s.
Sellmeier coefficients use micrometres (C_i in um^2).
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from dispfilter.errors import ConfigurationError, DomainError, PlatformNotFoundError

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact
PLATFORM_PATH_ENV = "DISPFILTER_PLATFORM_PATH"


class Process(str, enum.Enum):
    SPDC = "SPDC"
    SFWM = "SFWM"


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class WaveChannel:
    wavelength: float  # nm
    group_index: float
    loss: float  # dB/cm
    polarization: Polarization = Polarization.TE

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigurationError(f"wavelength must be > 0 nm, got {self.wavelength!r}")
        if not self.group_index >= 1:
            raise ConfigurationError(f"group index must be >= 1, got {self.group_index!r}")
        if not self.loss >= 0:
            raise ConfigurationError(f"loss must be >= 0 dB/cm, got {self.loss!r}")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    def to_dict(self) -> dict:
        return {
            "wavelength_nm": self.wavelength,
            "polarization": self.polarization.value,
            "group_index": self.group_index,
            "loss_db_per_cm": self.loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WaveChannel":
        return cls(
            wavelength=float(data["wavelength_nm"]),
            polarization=data.get("polarization", "TE"),
            group_index=float(data["group_index"]),
            loss=float(data["loss_db_per_cm"]),
        )


@dataclass(frozen=True)
class PlatformSpec:
    name: str
    process: Process
    pump: WaveChannel
    signal: WaveChannel
    idler: WaveChannel | None = None
    default_pump_photons: float = 1e9
    default_pair_probability: float = 0.1
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if self.signal.group_index == self.pump.group_index:
            raise ConfigurationError(
                f"{self.name}: pump and signal group indices are equal, the pulses never separate"
            )
        if not 0 < self.default_pair_probability < 1:
            raise ConfigurationError(f"{self.name}: default_pair_probability must be in (0, 1)")
        if not self.default_pump_photons >= 1:
            raise ConfigurationError(f"{self.name}: default_pump_photons must be >= 1")

    @property
    def delta_group_index(self) -> float:
        return self.pump.group_index - self.signal.group_index

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "process": self.process.value,
            "pump": self.pump.to_dict(),
            "signal": self.signal.to_dict(),
            "idler": self.idler.to_dict() if self.idler else None,
            "default_pump_photons": self.default_pump_photons,
            "default_pair_probability": self.default_pair_probability,
        }
        if self.notes:
            data["notes"] = self.notes
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PlatformSpec":
        idler = data.get("idler")
        return cls(
            name=data["name"],
            process=data["process"],
            pump=WaveChannel.from_dict(data["pump"]),
            signal=WaveChannel.from_dict(data["signal"]),
            idler=WaveChannel.from_dict(idler) if idler else None,
            default_pump_photons=float(data.get("default_pump_photons", 1e9)),
            default_pair_probability=float(data.get("default_pair_probability", 0.1)),
            notes=data.get("notes", ""),
        )


# -- Sellmeier ----------------------------------------------------------------

@dataclass(frozen=True)
class SellmeierModel:
    """n^2 = 1 + sum B_i l^2 / (l^2 - C_i), wavelength l in micrometres."""

    terms: tuple[tuple[float, float], ...]
    valid_range: tuple[float, float]  # um
    name: str = ""

    def _check(self, wavelength_um):
        lam = np.asarray(wavelength_um, dtype=float)
        lo, hi = self.valid_range
        if np.any(lam < lo) or np.any(lam > hi):
            raise DomainError(
                f"wavelength outside Sellmeier range [{lo}, {hi}] um for {self.name or 'model'}"
            )
        lam2 = lam * lam
        for _, c in self.terms:
            if np.any(np.isclose(lam2, c, rtol=1e-12, atol=0.0)):
                raise DomainError(f"wavelength sits on a Sellmeier pole (C = {c} um^2)")
        return lam


FUSED_SILICA = SellmeierModel(
    terms=((0.6961663, 0.0684043**2), (0.4079426, 0.1162414**2), (0.8974794, 9.896161**2)),
    valid_range=(0.21, 3.71),
    name="fused silica (Malitson 1965)",
)

SILICON_NITRIDE = SellmeierModel(
    terms=((3.0249, 0.1353406**2), (40314.0, 1239.842**2)),
    valid_range=(0.31, 5.504),
    name="stoichiometric Si3N4 (Luke 2015)",
)


def sellmeier_index(model: SellmeierModel, wavelength_um):
    """Phase index n(lambda)."""
    lam = model._check(wavelength_um)
    lam2 = lam * lam
    n2 = 1.0 + sum(b * lam2 / (lam2 - c) for b, c in model.terms)
    if np.any(n2 <= 1.0):
        raise DomainError("Sellmeier model gives n^2 <= 1 at this wavelength")
    n = np.sqrt(n2)
    return float(n) if n.ndim == 0 else n


def sellmeier_derivative(model: SellmeierModel, wavelength_um):
    """dn/dlambda in 1/um, from the analytic derivative of the Sellmeier sum."""
    lam = model._check(wavelength_um)
    lam2 = lam * lam
    n = np.asarray(sellmeier_index(model, lam))
    dn = -sum(b * c * lam / (lam2 - c) ** 2 for b, c in model.terms) / n
    return float(dn) if dn.ndim == 0 else dn


def group_index(model: SellmeierModel, wavelength_um):
    """Group index n - lambda dn/dlambda."""
    lam = np.asarray(wavelength_um, dtype=float)
    ng = np.asarray(sellmeier_index(model, lam)) - lam * np.asarray(sellmeier_derivative(model, lam))
    return float(ng) if ng.ndim == 0 else ng


# -- propagation ----------------------------------------------------------------

def arrival_separation(length: float, platform: PlatformSpec) -> float:
    """Pump-minus-signal arrival time after ``length`` metres (s).

    Positive when the signal arrives first.
    """
    if length < 0:
        raise DomainError(f"length must be >= 0, got {length!r}")
    return length * platform.delta_group_index / SPEED_OF_LIGHT


def propagation_loss_db(length: float, channel: WaveChannel) -> float:
    if length < 0:
        raise DomainError(f"length must be >= 0, got {length!r}")
    return channel.loss * length * 100.0


def attenuate(mu: float, loss_db: float) -> float:
    if mu < 0 or loss_db < 0:
        raise DomainError(f"attenuate needs mu >= 0 and loss >= 0, got mu={mu!r}, loss={loss_db!r}")
    return mu * 10.0 ** (-loss_db / 10.0)


# -- registry -------------------------------------------------------------------

def _builtin() -> tuple[PlatformSpec, ...]:
    return (
        PlatformSpec(
            name="SoI",
            process=Process.SFWM,
            pump=WaveChannel(1550.0, 1.4626, 0.1, Polarization.TE),
            signal=WaveChannel(1202.0, 1.4617, 0.1, Polarization.TE),
            idler=WaveChannel(2181.0, round(group_index(FUSED_SILICA, 2.181), 4), 0.1, Polarization.TE),
            notes="idler group index from bulk fused silica",
        ),
        PlatformSpec(
            name="SiN",
            process=Process.SFWM,
            pump=WaveChannel(1540.0, 2.0396, 0.00045, Polarization.TE),
            signal=WaveChannel(1600.0, 2.0395, 0.00045, Polarization.TE),
        ),
        PlatformSpec(
            name="Ti:LN",
            process=Process.SPDC,
            pump=WaveChannel(775.0, 2.369, 0.03, Polarization.TE),
            signal=WaveChannel(1550.0, 2.187, 0.03, Polarization.TM),
            notes="pump loss not tabulated; 1550 nm value reused",
        ),
        PlatformSpec(
            name="TFLN",
            process=Process.SPDC,
            pump=WaveChannel(775.0, 2.331, 0.27, Polarization.TE),
            signal=WaveChannel(1550.0, 2.270, 0.27, Polarization.TE),
        ),
    )


BUILTIN_PLATFORMS = _builtin()


def builtin_platforms() -> list[PlatformSpec]:
    return list(BUILTIN_PLATFORMS)


def platform_schema() -> dict:
    text = resources.files("dispfilter").joinpath("data/platform.schema.json").read_text()
    return json.loads(text)


def check_normal_dispersion(platform: PlatformSpec) -> PlatformSpec:
    if platform.signal.group_index > platform.pump.group_index:
        raise ConfigurationError(
            f"{platform.name}: signal group index {platform.signal.group_index} exceeds pump "
            f"{platform.pump.group_index}; anomalous dispersion (signal slower than pump) is not supported"
        )
    return platform


def parse_platforms(text: str, source: str = "<string>") -> list[PlatformSpec]:
    """Parse a platform document: one platform object or an array of them."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{source}: line {exc.lineno}, column {exc.colno}: invalid JSON: {exc.msg}"
        ) from exc
    items = doc if isinstance(doc, list) else [doc]
    schema = platform_schema()
    platforms = []
    for i, item in enumerate(items):
        try:
            jsonschema.validate(item, schema)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigurationError(f"{source}: platform #{i} at {where}: {exc.message}") from exc
        platforms.append(check_normal_dispersion(PlatformSpec.from_dict(item)))
    return platforms


def load_platform_file(path: str | os.PathLike) -> list[PlatformSpec]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read platform file {path}: {exc.strerror}") from exc
    return parse_platforms(text, str(path))


def dump_platforms(platforms: Sequence[PlatformSpec]) -> str:
    return json.dumps([p.to_dict() for p in platforms], indent=2)


def _bundled_variants() -> list[PlatformSpec]:
    folder = resources.files("dispfilter").joinpath("data/platforms")
    out = []
    for entry in sorted(folder.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out.extend(parse_platforms(entry.read_text(), entry.name))
    return out


def search_path() -> list[Path]:
    raw = os.environ.get(PLATFORM_PATH_ENV, "")
    return [Path(p) for p in raw.split(os.pathsep) if p]


def _search_path_platforms() -> Iterable[PlatformSpec]:
    for folder in search_path():
        if not folder.is_dir():
            continue
        for f in sorted(folder.glob("*.json")):
            yield from load_platform_file(f)


def get_platform(name: str, extra: Sequence[PlatformSpec] = ()) -> PlatformSpec:
    """Resolve a platform by name.

    Lookup order: ``extra``, built-ins, bundled variants (e.g.
    ``soi-text-consistent``), then JSON files in the directories listed in
    ``$DISPFILTER_PLATFORM_PATH``. Names match case-insensitively.
    """
    def pick(candidates):
        for p in candidates:
            if p.name.lower() == name.lower():
                return p
        return None

    for source in (extra, BUILTIN_PLATFORMS):
        found = pick(source)
        if found is not None:
            return found
    found = pick(_bundled_variants())
    if found is None:
        found = pick(_search_path_platforms())
    if found is None:
        raise PlatformNotFoundError(f"unknown platform {name!r}")
    return found
