"""Staged pipeline: ingest -> gazetteer -> extract -> timelines -> features
-> fit -> report, each stage writing a versioned artifact into the output
directory. Reruns with identical config and inputs are byte-identical, and
any stage can be rerun individually from the upstream artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .corpus import (AnnotatedPost, SchemaError, day_to_iso, iso_to_seconds,
                     serialize_post, validate_corpus, read_posts, SECONDS_PER_DAY)
from .gazetteer import (GazetteerEntry, GazetteerIndex, RegionSpec,
                        StateAliasTable, build_index)
from .mentions import LocationMention, extract_mentions, extraction_stats
from .descriptors import PatternConfig, annotate_mentions, match_descriptors
from .timeline import (PeakInfo, build_timeline, figure_rows, filter_sparse_locations,
                       find_peak)
from .authors import OrganizationRules, build_author_profiles
from .features import (AnalysisSpec, DesignMatrix, apply_rare_binning,
                       build_group_info, build_rows, encode)
from .glm import (FitResult, PenaltySpec, balanced_accuracy, deviance_report,
                  fit, grid_search_l2)
from .report import render_report

ARTIFACT_SCHEMA_VERSION = 1

DATA_DIR = Path(__file__).parent / "data"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@dataclass
class RunConfig:
    corpus_paths: list
    gazetteer_path: Path
    regions_path: Path
    outdir: Path
    aliases_path: Optional[Path] = None
    organization_rules_path: Optional[Path] = None
    analyses: list = dataclass_field(default_factory=lambda: [{"variant": "rq2a"}])
    pattern: dict = dataclass_field(default_factory=dict)
    t_buffer: int = 1
    min_dates: int = 5
    rare_threshold: int = 20
    active_percentile: float = 95.0
    l2_weight: float = 0.01
    l1_weight: float = 0.0
    l2_grid: list = dataclass_field(default_factory=list)
    se_method: str = "penalized"
    accuracy_runs: int = 10
    seed: int = 13
    strict: bool = True
    enforce_windows: bool = True

    @classmethod
    def from_dict(cls, raw: dict, base: Optional[Path] = None) -> "RunConfig":
        def path_of(value):
            p = Path(value)
            if base is not None and not p.is_absolute():
                p = base / p
            return p

        try:
            corpus = raw["corpus"]
            if isinstance(corpus, str):
                corpus = [corpus]
            cfg = cls(
                corpus_paths=[path_of(p) for p in corpus],
                gazetteer_path=path_of(raw["gazetteer"]),
                regions_path=path_of(raw["regions"]),
                outdir=path_of(raw["outdir"]),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        if "aliases" in raw:
            cfg.aliases_path = path_of(raw["aliases"])
        if "organization_rules" in raw:
            cfg.organization_rules_path = path_of(raw["organization_rules"])
        cfg.analyses = raw.get("analyses", cfg.analyses)
        cfg.pattern = raw.get("pattern", {})
        thresholds = raw.get("thresholds", {})
        cfg.t_buffer = int(thresholds.get("t_buffer", cfg.t_buffer))
        cfg.min_dates = int(thresholds.get("min_dates", cfg.min_dates))
        cfg.rare_threshold = int(thresholds.get("rare_threshold", cfg.rare_threshold))
        cfg.active_percentile = float(thresholds.get("active_percentile", cfg.active_percentile))
        glm_cfg = raw.get("glm", {})
        cfg.l2_weight = float(glm_cfg.get("l2_weight", cfg.l2_weight))
        cfg.l1_weight = float(glm_cfg.get("l1_weight", cfg.l1_weight))
        cfg.l2_grid = list(glm_cfg.get("l2_grid", []))
        cfg.se_method = glm_cfg.get("se_method", cfg.se_method)
        cfg.accuracy_runs = int(glm_cfg.get("accuracy_runs", cfg.accuracy_runs))
        cfg.seed = int(raw.get("seed", cfg.seed))
        cfg.strict = bool(raw.get("strict", cfg.strict))
        cfg.enforce_windows = bool(raw.get("enforce_windows", cfg.enforce_windows))
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, base=path.parent)

    def validate(self) -> None:
        for p in (*self.corpus_paths, self.gazetteer_path, self.regions_path):
            if not Path(p).exists():
                raise ConfigError(f"input path does not exist: {p}")
        for optional in (self.aliases_path, self.organization_rules_path):
            if optional is not None and not Path(optional).exists():
                raise ConfigError(f"input path does not exist: {optional}")
        for analysis in self.analyses:
            if analysis.get("variant") not in ("rq1_grouped", "rq1_event", "rq2a", "rq2b"):
                raise ConfigError(f"unknown analysis variant in config: {analysis}")
        if self.se_method not in ("penalized", "refit_unpenalized"):
            raise ConfigError(f"unknown se_method {self.se_method!r}")

    def config_hash(self) -> str:
        payload = {
            "corpus": [str(p) for p in self.corpus_paths],
            "gazetteer": str(self.gazetteer_path),
            "regions": str(self.regions_path),
            "aliases": str(self.aliases_path) if self.aliases_path else None,
            "organization_rules": (str(self.organization_rules_path)
                                   if self.organization_rules_path else None),
            "analyses": self.analyses,
            "pattern": self.pattern,
            "thresholds": [self.t_buffer, self.min_dates, self.rare_threshold,
                           self.active_percentile],
            "glm": [self.l2_weight, self.l1_weight, self.l2_grid, self.se_method,
                    self.accuracy_runs],
            "seed": self.seed,
            "strict": self.strict,
            "enforce_windows": self.enforce_windows,
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# artifact I/O

def _meta(cfg: RunConfig, artifact: str) -> dict:
    return {"artifact": artifact, "schema_version": ARTIFACT_SCHEMA_VERSION,
            "package_version": __version__, "config_hash": cfg.config_hash()}


def write_lines_artifact(cfg: RunConfig, name: str, lines: list) -> Path:
    path = Path(cfg.outdir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "#meta " + json.dumps(_meta(cfg, name), sort_keys=True)
    path.write_text("\n".join([header, *lines]) + "\n", encoding="utf-8")
    return path


def write_json_artifact(cfg: RunConfig, name: str, payload: dict) -> Path:
    path = Path(cfg.outdir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"_meta": _meta(cfg, name), **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_lines_artifact(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [l for l in lines if l and not l.startswith("#")]


def read_json_artifact(path) -> dict:
    body = json.loads(Path(path).read_text(encoding="utf-8"))
    body.pop("_meta", None)
    return body


def _require_artifact(cfg: RunConfig, stage: str, name: str) -> Path:
    path = Path(cfg.outdir) / name
    if not path.exists():
        raise StageError(stage, f"missing upstream artifact {name}; run earlier stages first")
    return path


# ---------------------------------------------------------------------------
# region / pattern config loading

def load_regions(path) -> tuple[dict, dict]:
    """Returns (event_id -> RegionSpec, event_id -> {group_id -> admin unit set})."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    regions = {}
    group_units: dict[str, dict] = {}
    for event_id, spec in raw.get("events", {}).items():
        units = frozenset((c, a) for c, a in spec["admin_units"])
        if not units:
            raise ConfigError(f"event {event_id!r} has no admin units")
        window = None
        if "window" in spec and spec["window"]:
            start, end = spec["window"]
            window = (iso_to_seconds(start), iso_to_seconds(end) + SECONDS_PER_DAY - 1)
        regions[event_id] = RegionSpec(
            region_id=event_id, admin_units=units,
            local_name_aliases=frozenset(spec.get("aliases", [])),
            window=window)
        group_units[event_id] = {
            gid: frozenset((c, a) for c, a in g["admin_units"])
            for gid, g in spec.get("groups", {}).items()}
    if not regions:
        raise ConfigError("region config defines no events")
    return regions, group_units


def load_pattern_config(cfg: RunConfig) -> PatternConfig:
    aliases = StateAliasTable.from_file(cfg.aliases_path or DATA_DIR / "state_abbreviations.txt")
    kwargs = {"state_alias_table": aliases}
    pattern = cfg.pattern
    for key in ("require_population_check", "max_arc_distance", "max_state_span"):
        if key in pattern:
            kwargs[key] = pattern[key]
    for key in ("modifier_relations", "compound_relations", "conjunction_relations"):
        if key in pattern:
            kwargs[key] = frozenset(pattern[key])
    if "label_map" in pattern:
        kwargs["label_map"] = dict(pattern["label_map"])
    return PatternConfig(**kwargs)


# ---------------------------------------------------------------------------
# stages

def stage_ingest(cfg: RunConfig) -> dict:
    regions, _ = load_regions(cfg.regions_path)
    windows = ({e: r.window for e, r in regions.items() if r.window is not None}
               if cfg.enforce_windows else None)
    posts: list[AnnotatedPost] = []
    all_errors: list[SchemaError] = []
    total_stats = None
    seen_ids: set[str] = set()
    for corpus_path in cfg.corpus_paths:
        with open(corpus_path, encoding="utf-8") as handle:
            lines = [l for l in handle if not l.startswith("#")]
        stats, errors = validate_corpus(lines, strict=cfg.strict, event_windows=windows)
        all_errors.extend(errors)
        total_stats = stats if total_stats is None else total_stats.merge(stats)
        error_lines = {e.line_no for e in errors}
        for line_no, line in enumerate(lines, start=1):
            if line.strip() and line_no not in error_lines:
                post = next(read_posts([line], strict=cfg.strict))
                if post.post_id in seen_ids:
                    all_errors.append(SchemaError(
                        "duplicate_id", f"duplicate post_id across files {post.post_id!r}",
                        field_name="post_id", record_id=post.post_id, line_no=line_no))
                    continue
                seen_ids.add(post.post_id)
                posts.append(post)
    posts.sort(key=lambda p: (p.timestamp, p.post_id))
    write_lines_artifact(cfg, "posts.jsonl", [serialize_post(p) for p in posts])
    write_json_artifact(cfg, "corpus_stats.json", total_stats.to_dict())
    write_lines_artifact(cfg, "schema_errors.jsonl",
                         [json.dumps(e.to_dict(), sort_keys=True) for e in all_errors])
    return {"posts": len(posts), "errors": len(all_errors)}


def load_posts_artifact(cfg: RunConfig, stage: str) -> list[AnnotatedPost]:
    path = _require_artifact(cfg, stage, "posts.jsonl")
    return list(read_posts(read_lines_artifact(path), strict=True))


def stage_gazetteer(cfg: RunConfig) -> dict:
    with open(cfg.gazetteer_path, encoding="utf-8") as handle:
        index = build_index(handle)
    entries = []
    seen = set()
    for stratum, table in (("mention", index._names), ("context", index._context_names)):
        for bucket in table.values():
            for entry in bucket:
                if (stratum, entry.geoname_id) in seen:
                    continue
                seen.add((stratum, entry.geoname_id))
                entries.append((stratum, entry))
    entries.sort(key=lambda pair: (pair[0], pair[1].geoname_id))
    lines = []
    for stratum, e in entries:
        lines.append(json.dumps({
            "stratum": stratum, "geoname_id": e.geoname_id,
            "canonical_name": e.canonical_name,
            "alternate_names": list(e.alternate_names),
            "feature_class": e.feature_class, "feature_code": e.feature_code,
            "country_code": e.country_code, "admin1_code": e.admin1_code,
            "population": e.population, "latitude": e.latitude,
            "longitude": e.longitude,
        }, sort_keys=True))
    lines.append(json.dumps({"excluded_names": sorted(index._excluded_names)},
                            sort_keys=True))
    write_lines_artifact(cfg, "gazetteer_entries.jsonl", lines)
    return {"mention_entries": index.entry_count, "context_entries": index.context_entry_count}


def load_index_artifact(cfg: RunConfig, stage: str) -> GazetteerIndex:
    path = _require_artifact(cfg, stage, "gazetteer_entries.jsonl")
    index = GazetteerIndex()
    for line in read_lines_artifact(path):
        row = json.loads(line)
        if "excluded_names" in row:
            index._excluded_names.update(row["excluded_names"])
            continue
        entry = GazetteerEntry(
            geoname_id=row["geoname_id"], canonical_name=row["canonical_name"],
            alternate_names=tuple(row["alternate_names"]),
            feature_class=row["feature_class"], feature_code=row["feature_code"],
            country_code=row["country_code"], admin1_code=row["admin1_code"],
            population=row["population"], latitude=row["latitude"],
            longitude=row["longitude"])
        index.add(entry, keep=row["stratum"] == "mention",
                  context=row["stratum"] == "context")
    index.finalize()
    return index


def _mention_to_json(m: LocationMention) -> str:
    e = m.entry
    return json.dumps({
        "post_id": m.post_id, "span": list(m.span), "surface": m.surface,
        "event_id": m.event_id, "timestamp": m.timestamp,
        "author_id": m.author_id, "group_id": m.group_id,
        "has_descriptor": m.has_descriptor, "descriptor_kind": m.descriptor_kind,
        "is_context": m.is_context,
        "entry": {
            "geoname_id": e.geoname_id, "canonical_name": e.canonical_name,
            "alternate_names": list(e.alternate_names),
            "feature_class": e.feature_class, "feature_code": e.feature_code,
            "country_code": e.country_code, "admin1_code": e.admin1_code,
            "population": e.population, "latitude": e.latitude,
            "longitude": e.longitude,
        },
    }, sort_keys=True)


def _mention_from_json(line: str) -> LocationMention:
    row = json.loads(line)
    e = row["entry"]
    return LocationMention(
        post_id=row["post_id"], span=tuple(row["span"]), surface=row["surface"],
        entry=GazetteerEntry(
            geoname_id=e["geoname_id"], canonical_name=e["canonical_name"],
            alternate_names=tuple(e["alternate_names"]),
            feature_class=e["feature_class"], feature_code=e["feature_code"],
            country_code=e["country_code"], admin1_code=e["admin1_code"],
            population=e["population"], latitude=e["latitude"],
            longitude=e["longitude"]),
        event_id=row["event_id"], timestamp=row["timestamp"],
        author_id=row["author_id"], group_id=row["group_id"],
        has_descriptor=row["has_descriptor"],
        descriptor_kind=row["descriptor_kind"], is_context=row["is_context"])


def stage_extract(cfg: RunConfig) -> dict:
    posts = load_posts_artifact(cfg, "extract")
    index = load_index_artifact(cfg, "extract")
    regions, _ = load_regions(cfg.regions_path)
    pattern = load_pattern_config(cfg)

    annotated: list[LocationMention] = []
    stats_by_event = {}
    skipped_events = 0
    by_event: dict[str, list[AnnotatedPost]] = {}
    for post in posts:
        by_event.setdefault(post.event_id, []).append(post)
    for event_id in sorted(by_event):
        region = regions.get(event_id)
        if region is None:
            skipped_events += 1
            continue
        event_posts = by_event[event_id]
        stats_by_event[event_id] = extraction_stats(event_posts, region, index).to_dict()
        for post in event_posts:
            mentions = extract_mentions(post, region, index)
            if not mentions:
                continue
            matches = match_descriptors(post, mentions, pattern, index)
            annotated.extend(annotate_mentions(mentions, matches))
    annotated.sort(key=lambda m: (m.timestamp, m.post_id, m.span))
    write_lines_artifact(cfg, "mentions.jsonl", [_mention_to_json(m) for m in annotated])
    write_json_artifact(cfg, "extraction_stats.json",
                        {"by_event": stats_by_event, "skipped_events": skipped_events})
    return {"mentions": len(annotated),
            "with_descriptor": sum(1 for m in annotated if m.has_descriptor)}


def load_mentions_artifact(cfg: RunConfig, stage: str) -> list[LocationMention]:
    path = _require_artifact(cfg, stage, "mentions.jsonl")
    return [_mention_from_json(line) for line in read_lines_artifact(path)]


def analysis_mentions(mentions: list[LocationMention]) -> list[LocationMention]:
    """The analysis sample: context-flagged mentions are excluded."""
    return [m for m in mentions if not m.is_context]


def stage_timeline(cfg: RunConfig) -> dict:
    mentions = analysis_mentions(load_mentions_artifact(cfg, "timeline"))
    groups: dict[tuple[str, int], list[LocationMention]] = {}
    for m in mentions:
        groups.setdefault((m.event_id, m.location_id), []).append(m)
    series_list = [build_timeline(ms) for _, ms in sorted(groups.items())]
    kept = filter_sparse_locations(series_list, cfg.min_dates)
    peaks = {(s.event_id, s.location_id): find_peak(s, cfg.t_buffer) for s in kept}

    timeline_lines = []
    for series in kept:
        timeline_lines.append(json.dumps({
            "location_id": series.location_id, "event_id": series.event_id,
            "bins": [[b.day, b.mention_count, b.descriptor_count] for b in series.bins],
        }, sort_keys=True))
    write_lines_artifact(cfg, "timelines.jsonl", timeline_lines)
    write_json_artifact(cfg, "peaks.json", {
        "t_buffer": cfg.t_buffer,
        "min_dates": cfg.min_dates,
        "peaks": {f"{event}:{loc}": {"peak_day": p.peak_day,
                                     "peak_date": day_to_iso(p.peak_day)}
                  for (event, loc), p in sorted(peaks.items())},
    })
    emit_figure_data(cfg, kept, peaks)
    return {"locations": len(series_list), "kept": len(kept)}


def emit_figure_data(cfg: RunConfig, series_list, peaks) -> list[Path]:
    """One plot-data file per location: day, log10 frequency, descriptor
    rate, phase; undefined rates are empty cells."""
    written = []
    for series in series_list:
        peak = peaks.get((series.event_id, series.location_id))
        if peak is None:
            continue
        lines = ["day\tlog10_frequency\tdescriptor_rate\tphase\tis_peak"]
        for row in figure_rows(series, peak):
            lines.append("\t".join([
                row["day"],
                "" if row["log10_frequency"] is None else f"{row['log10_frequency']:.6g}",
                "" if row["descriptor_rate"] is None else f"{row['descriptor_rate']:.6g}",
                row["phase"],
                "1" if row["is_peak"] else "0",
            ]))
        name = f"figures/{series.event_id}_location_{series.location_id}.tsv"
        written.append(write_lines_artifact(cfg, name, lines))
    return written


def load_peaks_artifact(cfg: RunConfig, stage: str) -> dict:
    path = _require_artifact(cfg, stage, "peaks.json")
    payload = read_json_artifact(path)
    t_buffer = payload["t_buffer"]
    peaks = {}
    for key, row in payload["peaks"].items():
        event, loc = key.rsplit(":", 1)
        peaks[(event, int(loc))] = PeakInfo(peak_day=row["peak_day"], t_buffer=t_buffer)
    return peaks


def _analysis_spec(cfg: RunConfig, raw: dict) -> AnalysisSpec:
    kwargs = {"variant": raw["variant"],
              "rare_threshold": cfg.rare_threshold,
              "active_percentile": cfg.active_percentile}
    for key in ("rare_threshold", "author_rare_threshold", "exclude_context_mentions",
                "log_prior_mentions", "standardize", "author_fixed_effects",
                "active_percentile"):
        if key in raw:
            kwargs[key] = raw[key]
    return AnalysisSpec(**kwargs)


def stage_features(cfg: RunConfig) -> dict:
    posts = load_posts_artifact(cfg, "features")
    mentions = load_mentions_artifact(cfg, "features")
    index = load_index_artifact(cfg, "features")
    regions, group_units = load_regions(cfg.regions_path)
    rules = (OrganizationRules.from_file(cfg.organization_rules_path)
             if cfg.organization_rules_path else
             OrganizationRules.from_file(DATA_DIR / "organization_rules.json"))
    profiles = build_author_profiles(posts, regions, index, rules,
                                     percentile=cfg.active_percentile)
    write_lines_artifact(cfg, "authors.jsonl", [
        json.dumps(profiles[a].to_dict(), sort_keys=True) for a in sorted(profiles)])

    needs_peaks = any(a.get("variant") in ("rq2a", "rq2b") for a in cfg.analyses)
    peaks = load_peaks_artifact(cfg, "features") if needs_peaks else {}
    sample = analysis_mentions(mentions)
    if needs_peaks:
        sample = [m for m in sample if (m.event_id, m.location_id) in peaks]

    all_group_units = {}
    for per_event in group_units.values():
        all_group_units.update(per_event)
    groups = build_group_info(posts, all_group_units)

    out = {}
    for raw in cfg.analyses:
        spec = _analysis_spec(cfg, raw)
        rows = build_rows(posts, sample, spec, peaks=peaks, profiles=profiles,
                          groups=groups if spec.variant == "rq1_grouped" else None,
                          index=index)
        if not rows:
            raise StageError("features", f"analysis {spec.variant} produced no rows")
        rows, rare_maps = apply_rare_binning(rows, spec)
        dm = encode(rows, standardize_numeric=spec.standardize)
        _write_matrix_artifact(cfg, spec.variant, dm, rare_maps)
        out[spec.variant] = {"rows": len(rows), "columns": len(dm.columns)}
    return out


def _write_matrix_artifact(cfg: RunConfig, variant: str, dm: DesignMatrix,
                           rare_maps: dict) -> None:
    lines = [json.dumps({
        "columns": [c.to_dict() for c in dm.columns],
        "references": dm.references,
        "dropped": dm.dropped,
        "rare_maps": rare_maps,
        "standardized": dm.standardized,
    }, sort_keys=True)]
    header = ["row_key", "y"] + dm.column_names
    lines.append("\t".join(header))
    for i, key in enumerate(dm.row_keys):
        cells = ["|".join(str(k) for k in key), str(int(dm.y[i]))]
        cells.extend(f"{v:.10g}" for v in dm.X[i])
        lines.append("\t".join(cells))
    write_lines_artifact(cfg, f"features_{variant}.tsv", lines)


def load_matrix_artifact(cfg: RunConfig, stage: str, variant: str) -> DesignMatrix:
    from .features import ColumnMeta

    path = _require_artifact(cfg, stage, f"features_{variant}.tsv")
    lines = read_lines_artifact(path)
    meta = json.loads(lines[0])
    columns = []
    for c in meta["columns"]:
        columns.append(ColumnMeta(
            name=c["name"], kind=c["kind"], mean=c.get("mean", 0.0),
            sd=c.get("sd", 1.0), group=c.get("group"), level=c.get("level")))
    rows = lines[2:]
    X = np.zeros((len(rows), len(columns)))
    y = np.zeros(len(rows))
    keys = []
    for i, line in enumerate(rows):
        cells = line.split("\t")
        parts = cells[0].split("|")
        keys.append((parts[0], int(parts[1]), int(parts[2])))
        y[i] = float(cells[1])
        X[i] = [float(v) for v in cells[2:]]
    return DesignMatrix(X=X, y=y, columns=columns, row_keys=keys,
                        references=meta["references"],
                        dropped=[tuple(d) for d in meta["dropped"]],
                        standardized=meta["standardized"])


def fit_analysis(cfg: RunConfig, dm: DesignMatrix):
    """Fit one design matrix under the configured penalty; the Holm family
    is the non-fixed-effect columns (the reported Table rows)."""
    from .glm import OneClassOnly

    l2 = cfg.l2_weight
    if cfg.l2_grid:
        l2 = grid_search_l2(dm.X, dm.y, cfg.l2_grid, seed=cfg.seed)
    penalty = PenaltySpec(l2_weight=l2, l1_weight=cfg.l1_weight)
    inference_columns = [i for i, c in enumerate(dm.columns) if c.kind != "onehot"]
    result = fit(dm.X, dm.y, penalty,
                 penalty_mask=dm.penalty_mask(penalty.penalize_fixed_effects),
                 column_names=dm.column_names,
                 inference_columns=inference_columns)
    if cfg.se_method != "penalized":
        from .glm import standard_errors
        se = standard_errors(result, dm.X, dm.y, method=cfg.se_method)
        result.standard_errors = se.values
        result.se_method = se.method
        result.se_singular = se.singular
    deviance = deviance_report(result, dm.X, dm.y)
    try:
        accuracy = balanced_accuracy(result, dm.X, dm.y,
                                     runs=cfg.accuracy_runs, seed=cfg.seed)
        result.accuracy_mean, result.accuracy_sd = accuracy
    except OneClassOnly:
        accuracy = None
    return result, deviance, accuracy


def stage_fit(cfg: RunConfig) -> dict:
    out = {}
    for raw in cfg.analyses:
        variant = raw["variant"]
        dm = load_matrix_artifact(cfg, "fit", variant)
        result, deviance, accuracy = fit_analysis(cfg, dm)
        payload = result.to_dict()
        payload["deviance_report"] = deviance
        write_json_artifact(cfg, f"fit_{variant}.json", payload)
        out[variant] = {"converged": result.converged,
                        "deviance": deviance["model_deviance"]}
    return out


def _fit_result_from_payload(payload: dict) -> FitResult:
    def arr(value):
        return None if value is None else np.array(value, dtype=float)

    return FitResult(
        coefficients=np.array(payload["coefficients"]),
        converged=payload["converged"],
        iterations=payload["iterations"],
        objective=payload["objective"],
        objective_history=[],
        gradient_norm=payload["gradient_norm"],
        model_deviance=payload["model_deviance"],
        null_deviance=payload["null_deviance"],
        penalty=PenaltySpec(l2_weight=payload["penalty"]["l2_weight"],
                            l1_weight=payload["penalty"]["l1_weight"]),
        column_names=payload["column_names"],
        standard_errors=arr(payload["standard_errors"]),
        se_method=payload["se_method"],
        se_singular=payload["se_singular"],
        zvalues=arr(payload["zvalues"]),
        pvalues=arr(payload["pvalues"]),
        corrected_pvalues=arr(payload["corrected_pvalues"]),
        correction_method=payload["correction_method"],
        inference_columns=payload["inference_columns"],
        accuracy_mean=payload["accuracy_mean"],
        accuracy_sd=payload["accuracy_sd"],
    )


def stage_report(cfg: RunConfig) -> dict:
    """Render Table-style reports from the fit artifacts (no refitting)."""
    out = {}
    for raw in cfg.analyses:
        variant = raw["variant"]
        dm = load_matrix_artifact(cfg, "report", variant)
        fit_path = _require_artifact(cfg, "report", f"fit_{variant}.json")
        payload = read_json_artifact(fit_path)
        deviance = payload.pop("deviance_report")
        result = _fit_result_from_payload(payload)
        accuracy = (None if result.accuracy_mean is None
                    else (result.accuracy_mean, result.accuracy_sd))
        body = render_report(result, dm, variant=variant,
                             deviance=deviance, accuracy=accuracy)
        write_lines_artifact(cfg, f"report_{variant}.tsv", body.splitlines())
        out[variant] = f"report_{variant}.tsv"
    return out


STAGES = (
    ("ingest", stage_ingest),
    ("gazetteer", stage_gazetteer),
    ("extract", stage_extract),
    ("timeline", stage_timeline),
    ("features", stage_features),
    ("fit", stage_fit),
    ("report", stage_report),
)


class _OutdirLock:
    """Single process owns the output directory while a run is active."""

    def __init__(self, outdir: Path):
        self.path = Path(outdir) / ".lock"
        self.fd = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StageError("run", f"output directory is locked ({self.path})")
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
        self.path.unlink(missing_ok=True)
        return False


def run(cfg: RunConfig) -> dict:
    """Execute all stages; abort with the failing stage's name. The run
    report lists every artifact with the config hash."""
    cfg.validate()
    report: dict = {"config_hash": cfg.config_hash(), "stages": {}}
    with _OutdirLock(cfg.outdir):
        for name, stage in STAGES:
            try:
                report["stages"][name] = stage(cfg)
            except (StageError, ConfigError):
                raise
            except Exception as exc:
                raise StageError(name, str(exc)) from exc
    write_json_artifact(cfg, "run_report.json", report)
    return report
