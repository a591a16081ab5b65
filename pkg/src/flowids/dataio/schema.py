from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import SchemaError

BUILTIN = {"unsw_nb15": "unsw_nb15.ini", "ton_iot": "ton_iot.ini"}


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in text.replace("\n", " ").split(",") if item.strip()]


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles and class names for one flow dataset."""

    name: str
    features: tuple[str, ...]
    categorical: frozenset[str]
    src_ip: str
    src_port: str
    dst_ip: str
    dst_port: str
    timestamp: str
    label_binary: str
    label_multiclass: str
    classes: tuple[str, ...]
    normal_class: str = "Normal"
    layout: tuple[str, ...] = ()
    aliases: dict = field(default_factory=dict)
    version: int = 1

    def __post_init__(self):
        unknown = [c for c in self.categorical if c not in self.features]
        if unknown:
            raise SchemaError(f"{self.name}: categorical columns not among features: {unknown}")
        if self.normal_class not in self.classes:
            raise SchemaError(f"{self.name}: normal class {self.normal_class!r} not in classes")
        if len(set(self.features)) != len(self.features):
            raise SchemaError(f"{self.name}: duplicate feature columns")

    @property
    def endpoint_columns(self) -> tuple[str, str, str, str]:
        return (self.src_ip, self.src_port, self.dst_ip, self.dst_port)

    @property
    def required_columns(self) -> list[str]:
        cols = list(self.endpoint_columns) + [self.timestamp, self.label_binary,
                                              self.label_multiclass]
        cols += [f for f in self.features if f not in cols]
        return cols

    @property
    def numeric_features(self) -> list[str]:
        return [f for f in self.features if f not in self.categorical]

    def canonical_class(self, raw: str) -> str | None:
        """Trim and case-fold ``raw`` and map it onto a declared class name."""
        key = raw.strip().casefold()
        if not key:
            return None
        key = self.aliases.get(key, key).casefold()
        for name in self.classes:
            if name.casefold() == key:
                return name
        return None


def parse_schema(text: str, source: str = "<string>") -> DatasetSchema:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
        cols = cp["columns"]
        schema = DatasetSchema(
            name=cp["dataset"]["name"],
            version=cp["dataset"].getint("version", 1),
            features=tuple(_split_list(cp["features"]["order"])),
            categorical=frozenset(_split_list(cp["features"].get("categorical", ""))),
            src_ip=cols["src_ip"],
            src_port=cols["src_port"],
            dst_ip=cols["dst_ip"],
            dst_port=cols["dst_port"],
            timestamp=cols["timestamp"],
            label_binary=cols["label_binary"],
            label_multiclass=cols["label_multiclass"],
            classes=tuple(_split_list(cp["classes"]["order"])),
            normal_class=cp["classes"].get("normal", "Normal"),
            layout=tuple(_split_list(cp["layout"]["order"])) if cp.has_section("layout") else (),
            aliases={k.casefold(): v.strip() for k, v in cp["aliases"].items()}
            if cp.has_section("aliases") else {},
        )
    except (KeyError, configparser.Error) as exc:
        raise SchemaError(f"{source}: malformed schema file ({exc})") from None
    return schema


def load_schema(name_or_path: str | Path) -> DatasetSchema:
    """Load a bundled schema by key (``unsw_nb15``, ``ton_iot``) or from a file path."""
    key = str(name_or_path).lower().replace("-", "_")
    if key in BUILTIN:
        text = resources.files(__package__).joinpath("schemas").joinpath(BUILTIN[key]).read_text("utf-8")
        return parse_schema(text, BUILTIN[key])
    path = Path(name_or_path)
    if not path.is_file():
        raise SchemaError(f"unknown schema {name_or_path!r}; expected one of {sorted(BUILTIN)} or a file")
    return parse_schema(path.read_text("utf-8"), str(path))
