"""YAML configuration loading with strict schema validation.

One file drives both index building and classification. Every section maps
onto a parameter dataclass; unknown keys anywhere are rejected so typos fail
loudly instead of silently running on defaults. Relative paths are resolved
against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .coherence import CoherenceParams
from .edges import EdgeWeightParams
from .errors import ConfigError
from .expansion import ExpansionParams
from .index import ParentParams
from .kb import Iri, PropertyRegistry, TextField
from .ranking import RankingParams
from .selection import SelectionParams
from .vectors import NGRAM_SIZES


@dataclass(frozen=True)
class KbSource:
    paths: tuple[Path, ...] = ()
    lenient: bool = False


@dataclass(frozen=True)
class RetrievalParams:
    k: int = 30
    label_field: str = "label"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"retrieval k must be at least 1, got {self.k}")
        if not self.label_field:
            raise ConfigError("label_field must be non-empty")


@dataclass(frozen=True)
class AppConfig:
    kb: KbSource = field(default_factory=KbSource)
    registry: PropertyRegistry = field(default_factory=PropertyRegistry)
    edge_weights: EdgeWeightParams = field(default_factory=EdgeWeightParams)
    memory_budget: int | None = None
    expansion: ExpansionParams = field(default_factory=ExpansionParams)
    parents: ParentParams = field(default_factory=ParentParams)
    embedding_file: Path | None = None
    ngram_sizes: tuple[int, ...] = NGRAM_SIZES
    ranking: RankingParams = field(default_factory=RankingParams)
    coherence: CoherenceParams = field(default_factory=CoherenceParams)
    selection: SelectionParams = field(default_factory=SelectionParams)
    retrieval: RetrievalParams = field(default_factory=RetrievalParams)

    def config_hash(self) -> str:
        blob = json.dumps(to_dict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


_TOP_KEYS = {
    "kb", "registry", "edge_weights", "expansion", "parents",
    "encoder", "ranking", "coherence", "selection", "retrieval",
}


def _require_mapping(value: Any, context: str) -> Mapping[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{context} must be a mapping, got {type(value).__name__}")
    for key in value:
        if not isinstance(key, str):
            raise ConfigError(f"{context} has a non-string key {key!r}")
    return value


def _reject_unknown(d: Mapping[str, Any], allowed: set[str], context: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}")


def _get_bool(d: Mapping[str, Any], key: str, default: bool, context: str) -> bool:
    value = d.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{context}.{key} must be a boolean, got {value!r}")
    return value


def _get_real(d: Mapping[str, Any], key: str, default: float, context: str) -> float:
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number, got {value!r}")
    return float(value)


def _get_int(d: Mapping[str, Any], key: str, default: int, context: str) -> int:
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}.{key} must be an integer, got {value!r}")
    return value


def _get_str(d: Mapping[str, Any], key: str, default: str, context: str) -> str:
    value = d.get(key, default)
    if not isinstance(value, str):
        raise ConfigError(f"{context}.{key} must be a string, got {value!r}")
    return value


def _get_iri(value: Any, context: str) -> Iri:
    if not isinstance(value, str):
        raise ConfigError(f"{context} must be an IRI string, got {value!r}")
    try:
        return Iri(value)
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def _get_str_list(d: Mapping[str, Any], key: str, context: str) -> list[str]:
    value = d.get(key, [])
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise ConfigError(f"{context}.{key} must be a list of strings")
    return value


def _parse_registry(raw: Mapping[str, Any], context: str) -> PropertyRegistry:
    allowed = {
        "text_fields", "edge_base_weights", "parent_properties",
        "close_match_predicates", "prune_predicates", "cross_refs",
    }
    _reject_unknown(raw, allowed, context)

    text_fields: dict[Iri, TextField] = {}
    for pred, spec in _require_mapping(raw.get("text_fields"), f"{context}.text_fields").items():
        fctx = f"{context}.text_fields[{pred}]"
        spec = _require_mapping(spec, fctx)
        _reject_unknown(spec, {"name", "search_weight"}, fctx)
        if "name" not in spec:
            raise ConfigError(f"{fctx}: missing name")
        text_fields[_get_iri(pred, fctx)] = TextField(
            name=_get_str(spec, "name", "", fctx),
            weight=_get_real(spec, "search_weight", 1.0, fctx),
        )

    edge_base_weights: dict[Iri, float] = {}
    for pred, w in _require_mapping(
        raw.get("edge_base_weights"), f"{context}.edge_base_weights"
    ).items():
        ectx = f"{context}.edge_base_weights[{pred}]"
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise ConfigError(f"{ectx} must be a number, got {w!r}")
        edge_base_weights[_get_iri(pred, ectx)] = float(w)

    parent_properties: list[tuple[Iri, str]] = []
    raw_parents = raw.get("parent_properties", [])
    if not isinstance(raw_parents, list):
        raise ConfigError(f"{context}.parent_properties must be a list")
    for i, entry in enumerate(raw_parents):
        pctx = f"{context}.parent_properties[{i}]"
        entry = _require_mapping(entry, pctx)
        _reject_unknown(entry, {"predicate", "direction"}, pctx)
        direction = _get_str(entry, "direction", "forward", pctx)
        parent_properties.append((_get_iri(entry.get("predicate"), pctx), direction))

    cross_refs = _require_mapping(raw.get("cross_refs"), f"{context}.cross_refs")
    _reject_unknown(cross_refs, {"predicates", "prefixes", "target"}, f"{context}.cross_refs")
    prefixes = {}
    for prefix, ns in _require_mapping(
        cross_refs.get("prefixes"), f"{context}.cross_refs.prefixes"
    ).items():
        if not isinstance(ns, str):
            raise ConfigError(f"{context}.cross_refs.prefixes[{prefix}] must be a string")
        prefixes[prefix] = ns
    target = cross_refs.get("target")

    return PropertyRegistry(
        text_fields=text_fields,
        edge_base_weights=edge_base_weights,
        parent_properties=tuple(parent_properties),
        close_match_predicates=frozenset(
            _get_iri(v, f"{context}.close_match_predicates")
            for v in _get_str_list(raw, "close_match_predicates", context)
        ),
        prune_predicates=frozenset(
            _get_iri(v, f"{context}.prune_predicates")
            for v in _get_str_list(raw, "prune_predicates", context)
        ),
        cross_ref_predicates=frozenset(
            _get_iri(v, f"{context}.cross_refs.predicates")
            for v in _get_str_list(cross_refs, "predicates", f"{context}.cross_refs")
        ),
        cross_ref_prefixes=prefixes,
        cross_ref_target=None if target is None else _get_iri(target, f"{context}.cross_refs.target"),
    )


def _resolve(path_str: str, base: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else (base / p).resolve()


def parse_config(data: Mapping[str, Any], base_dir: Path) -> AppConfig:
    data = _require_mapping(data, "config")
    _reject_unknown(data, _TOP_KEYS, "config")
    try:
        kb_raw = _require_mapping(data.get("kb"), "kb")
        _reject_unknown(kb_raw, {"paths", "lenient"}, "kb")
        kb = KbSource(
            paths=tuple(_resolve(p, base_dir) for p in _get_str_list(kb_raw, "paths", "kb")),
            lenient=_get_bool(kb_raw, "lenient", False, "kb"),
        )

        registry = _parse_registry(_require_mapping(data.get("registry"), "registry"), "registry")

        ew = _require_mapping(data.get("edge_weights"), "edge_weights")
        _reject_unknown(
            ew, {"f_l", "f_g", "c_max", "default_base_weight", "memory_budget"}, "edge_weights"
        )
        edge_weights = EdgeWeightParams(
            f_l=_get_real(ew, "f_l", 0.5, "edge_weights"),
            f_g=_get_real(ew, "f_g", 0.5, "edge_weights"),
            c_max=_get_int(ew, "c_max", 4, "edge_weights"),
            default_base_weight=_get_real(ew, "default_base_weight", 2.0, "edge_weights"),
        )
        budget = ew.get("memory_budget")
        if budget is not None and (isinstance(budget, bool) or not isinstance(budget, int)):
            raise ConfigError(f"edge_weights.memory_budget must be an integer, got {budget!r}")

        ex = _require_mapping(data.get("expansion"), "expansion")
        _reject_unknown(ex, {"max_depth", "max_distance", "max_neighbors"}, "expansion")
        expansion = ExpansionParams(
            max_depth=_get_int(ex, "max_depth", 3, "expansion"),
            max_distance=_get_real(ex, "max_distance", 4.0, "expansion"),
            max_neighbors=_get_int(ex, "max_neighbors", 512, "expansion"),
        )

        pa = _require_mapping(data.get("parents"), "parents")
        _reject_unknown(pa, {"alpha"}, "parents")
        parents = ParentParams(alpha=_get_real(pa, "alpha", 0.3, "parents"))

        enc = _require_mapping(data.get("encoder"), "encoder")
        _reject_unknown(enc, {"embedding_file", "ngram_sizes"}, "encoder")
        embedding_file = None
        if "embedding_file" in enc:
            embedding_file = _resolve(
                _get_str(enc, "embedding_file", "", "encoder"), base_dir
            )
        sizes_raw = enc.get("ngram_sizes", list(NGRAM_SIZES))
        if (
            not isinstance(sizes_raw, list)
            or not sizes_raw
            or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in sizes_raw)
        ):
            raise ConfigError("encoder.ngram_sizes must be a non-empty list of positive integers")

        ra = _require_mapping(data.get("ranking"), "ranking")
        _reject_unknown(
            ra, {"w_l", "w_sm", "w_sc", "alpha", "beta", "use_lut", "lut_resolution"}, "ranking"
        )
        ranking = RankingParams(
            w_l=_get_real(ra, "w_l", 1.0, "ranking"),
            w_sm=_get_real(ra, "w_sm", 1.0, "ranking"),
            w_sc=_get_real(ra, "w_sc", 0.5, "ranking"),
            alpha=_get_real(ra, "alpha", 4.0, "ranking"),
            beta=_get_real(ra, "beta", 8.0, "ranking"),
            use_lut=_get_bool(ra, "use_lut", False, "ranking"),
            lut_resolution=_get_int(ra, "lut_resolution", 4096, "ranking"),
        )

        co = _require_mapping(data.get("coherence"), "coherence")
        _reject_unknown(
            co,
            {"top_m_per_mention", "min_keep", "gamma", "prune_fraction", "enabled"},
            "coherence",
        )
        coherence = CoherenceParams(
            top_m_per_mention=_get_int(co, "top_m_per_mention", 3, "coherence"),
            min_keep=_get_int(co, "min_keep", 1, "coherence"),
            gamma=_get_real(co, "gamma", 0.25, "coherence"),
            prune_fraction=_get_real(co, "prune_fraction", 0.5, "coherence"),
            enabled=_get_bool(co, "enabled", True, "coherence"),
        )

        se = _require_mapping(data.get("selection"), "selection")
        _reject_unknown(
            se,
            {"lambda_diversity", "kneedle_sensitivity", "min_topics", "include_parents"},
            "selection",
        )
        selection = SelectionParams(
            lambda_diversity=_get_real(se, "lambda_diversity", 0.2, "selection"),
            kneedle_sensitivity=_get_real(se, "kneedle_sensitivity", 1.0, "selection"),
            min_topics=_get_int(se, "min_topics", 3, "selection"),
            include_parents=_get_bool(se, "include_parents", True, "selection"),
        )

        re_ = _require_mapping(data.get("retrieval"), "retrieval")
        _reject_unknown(re_, {"k", "label_field"}, "retrieval")
        retrieval = RetrievalParams(
            k=_get_int(re_, "k", 30, "retrieval"),
            label_field=_get_str(re_, "label_field", "label", "retrieval"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    return AppConfig(
        kb=kb,
        registry=registry,
        edge_weights=edge_weights,
        memory_budget=budget,
        expansion=expansion,
        parents=parents,
        embedding_file=embedding_file,
        ngram_sizes=tuple(sizes_raw),
        ranking=ranking,
        coherence=coherence,
        selection=selection,
        retrieval=retrieval,
    )


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        data = {}
    return parse_config(data, path.parent.resolve())


def to_dict(config: AppConfig) -> dict[str, Any]:
    """Plain-data form of a config; parse_config inverts it exactly.

    Paths come out absolute, so the dict is location-independent."""
    reg = config.registry
    out: dict[str, Any] = {
        "kb": {
            "paths": [str(p) for p in config.kb.paths],
            "lenient": config.kb.lenient,
        },
        "registry": {
            "text_fields": {
                str(pred): {"name": tf.name, "search_weight": tf.weight}
                for pred, tf in sorted(reg.text_fields.items())
            },
            "edge_base_weights": {
                str(pred): w for pred, w in sorted(reg.edge_base_weights.items())
            },
            "parent_properties": [
                {"predicate": str(pred), "direction": direction}
                for pred, direction in reg.parent_properties
            ],
            "close_match_predicates": sorted(str(p) for p in reg.close_match_predicates),
            "prune_predicates": sorted(str(p) for p in reg.prune_predicates),
            "cross_refs": {
                "predicates": sorted(str(p) for p in reg.cross_ref_predicates),
                "prefixes": dict(sorted(reg.cross_ref_prefixes.items())),
                "target": None if reg.cross_ref_target is None else str(reg.cross_ref_target),
            },
        },
        "edge_weights": {
            "f_l": config.edge_weights.f_l,
            "f_g": config.edge_weights.f_g,
            "c_max": config.edge_weights.c_max,
            "default_base_weight": config.edge_weights.default_base_weight,
            "memory_budget": config.memory_budget,
        },
        "expansion": {
            "max_depth": config.expansion.max_depth,
            "max_distance": config.expansion.max_distance,
            "max_neighbors": config.expansion.max_neighbors,
        },
        "parents": {"alpha": config.parents.alpha},
        "encoder": {
            "ngram_sizes": list(config.ngram_sizes),
        },
        "ranking": {
            "w_l": config.ranking.w_l,
            "w_sm": config.ranking.w_sm,
            "w_sc": config.ranking.w_sc,
            "alpha": config.ranking.alpha,
            "beta": config.ranking.beta,
            "use_lut": config.ranking.use_lut,
            "lut_resolution": config.ranking.lut_resolution,
        },
        "coherence": {
            "top_m_per_mention": config.coherence.top_m_per_mention,
            "min_keep": config.coherence.min_keep,
            "gamma": config.coherence.gamma,
            "prune_fraction": config.coherence.prune_fraction,
            "enabled": config.coherence.enabled,
        },
        "selection": {
            "lambda_diversity": config.selection.lambda_diversity,
            "kneedle_sensitivity": config.selection.kneedle_sensitivity,
            "min_topics": config.selection.min_topics,
            "include_parents": config.selection.include_parents,
        },
        "retrieval": {
            "k": config.retrieval.k,
            "label_field": config.retrieval.label_field,
        },
    }
    if config.embedding_file is not None:
        out["encoder"]["embedding_file"] = str(config.embedding_file)
    return out


def dump_config(config: AppConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=True, allow_unicode=True)
