"""Synthetic corpus generation for desk-scale pipeline testing.

Generates interchange-format posts whose descriptor labels are drawn from a
logistic model y ~ Bernoulli(sigmoid(x . beta*)) over a fixed feature basis
(intercept, z-scored day, during/post-peak, URL/media flags, author
organization/locality). When y = 1 the post's token stream realizes an
actual descriptor construction (state suffix or "capital of <big city>"
modifier clause), so running the real extraction and matching recovers the
label. Per-location daily mention counts are deterministic with a unique
designed peak, which makes the pipeline's detected peaks equal the
generator's.

A phase profile (pre, during, post) is a convenience parameterization:
intercept = logit(pre), during = logit(during) - logit(pre), post =
logit(post) - logit(pre). Everything is drawn from one seeded generator;
identical specs produce byte-identical corpora.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import SECONDS_PER_DAY, iso_to_seconds

BETA_BASIS = ("intercept", "day_z", "during_peak", "post_peak",
              "has_url", "has_media", "is_organization", "is_local")

_NAME_PREFIXES = ("Arva", "Belco", "Canto", "Dori", "Elva", "Fenwi", "Galdo",
                  "Harve", "Istri", "Junco", "Kelva", "Lorbe", "Mirno",
                  "Norva", "Ostre", "Pelda")
_NAME_SUFFIXES = ("ra", "na", "ville", "ton", "mar", "lio")


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def location_names(count: int) -> list[str]:
    names = []
    for i in range(count):
        prefix = _NAME_PREFIXES[i % len(_NAME_PREFIXES)]
        suffix = _NAME_SUFFIXES[(i // len(_NAME_PREFIXES)) % len(_NAME_SUFFIXES)]
        names.append(prefix + suffix)
    return names


@dataclass
class SyntheticSpec:
    event_id: str = "simev"
    start_date: str = "2017-09-01"
    window_days: int = 30
    n_locations: int = 12
    n_authors: int = 60
    base_daily_mentions: int = 2
    peak_mentions: int = 9
    t_buffer: int = 1
    beta: dict = field(default_factory=dict)          # names from BETA_BASIS
    phase_profile: Optional[tuple] = None             # (pre, during, post) rates
    day_slope: float = 0.0                            # beta on z-scored day
    url_rate: float = 0.3
    media_rate: float = 0.25
    org_rate: float = 0.15
    local_rate: float = 0.35
    unknown_author_rate: float = 0.15
    modifier_share: float = 0.3                       # vs state constructions
    grouped: bool = False
    own_group_rate: float = 0.6
    seed: int = 13
    state_name: str = "Sintara"
    state_abbr: str = "SN"
    big_city: str = "Granopolis"
    big_city_population: int = 5_000_000
    country_code: str = "SX"

    def resolved_beta(self) -> dict:
        coeffs = {name: 0.0 for name in BETA_BASIS}
        if self.phase_profile is not None:
            pre, during, post = self.phase_profile
            for rate in (pre, during, post):
                if not 0.0 < rate < 1.0:
                    raise ValueError("phase profile rates must be in (0, 1)")
            coeffs["intercept"] = logit(pre)
            coeffs["during_peak"] = logit(during) - logit(pre)
            coeffs["post_peak"] = logit(post) - logit(pre)
        coeffs["day_z"] = self.day_slope
        for name, value in self.beta.items():
            if name not in coeffs:
                raise ValueError(f"unknown beta name {name!r}")
            coeffs[name] = float(value)
        return coeffs

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticSpec":
        known = dict(raw)
        if "phase_profile" in known and known["phase_profile"] is not None:
            known["phase_profile"] = tuple(known["phase_profile"])
        return cls(**known)


@dataclass
class _Author:
    author_id: str
    is_organization: bool
    is_local: bool
    unknown: bool
    profile_location: Optional[str]
    metadata: Optional[dict]


def _make_authors(spec: SyntheticSpec, names: list[str],
                  rng: np.random.Generator) -> list[_Author]:
    authors = []
    for i in range(spec.n_authors):
        is_org = rng.random() < spec.org_rate
        is_local = (not is_org) and rng.random() < spec.local_rate
        unknown = rng.random() < spec.unknown_author_rate
        author_id = f"a{i:04d}"
        if unknown:
            profile, metadata = None, None
        elif is_org:
            profile = "Capital District"
            metadata = {"name": f"{spec.state_name} Relief Agency {i}",
                        "description": "official updates",
                        "followers": 5000 + i, "friends": 40}
        else:
            home = names[int(rng.integers(len(names)))]
            profile = f"{home}, {spec.state_abbr}" if is_local else "Faraway Plains"
            metadata = {"name": f"Resident {i}", "description": "posting about the storm",
                        "followers": int(rng.integers(50, 400)), "friends": 200}
        authors.append(_Author(author_id, is_org, is_local, unknown, profile, metadata))
    return authors


def _plain_tokens(loc_tokens: list[str]) -> list[dict]:
    tokens = []
    k = len(loc_tokens)
    for i, form in enumerate(loc_tokens, start=1):
        tokens.append({
            "index": i, "form": form,
            "head": k + 2 if i == 1 else 1,    # span head attaches to the verb
            "deprel": "nsubj" if i == 1 else "flat",
            "ner": "B-LOCATION" if i == 1 else "I-LOCATION"})
    tokens.append({"index": k + 1, "form": "is", "head": k + 2, "deprel": "aux", "ner": "O"})
    tokens.append({"index": k + 2, "form": "flooding", "head": 0, "deprel": "root", "ner": "O"})
    return tokens


def _state_tokens(loc_tokens: list[str], state_form: str) -> list[dict]:
    k = len(loc_tokens)
    root = k + 4
    tokens = []
    for i, form in enumerate(loc_tokens, start=1):
        tokens.append({
            "index": i, "form": form,
            "head": root if i == 1 else 1,
            "deprel": "nsubj" if i == 1 else "flat",
            "ner": "B-LOCATION" if i == 1 else "I-LOCATION"})
    tokens.append({"index": k + 1, "form": ",", "head": 1, "deprel": "punct", "ner": "O"})
    tokens.append({"index": k + 2, "form": state_form, "head": 1, "deprel": "appos", "ner": "O"})
    tokens.append({"index": k + 3, "form": "is", "head": root, "deprel": "aux", "ner": "O"})
    tokens.append({"index": root, "form": "flooding", "head": 0, "deprel": "root", "ner": "O"})
    return tokens


def _modifier_tokens(loc_tokens: list[str], big_city: str) -> list[dict]:
    k = len(loc_tokens)
    comma, capital, of, city, is_, root = k + 1, k + 2, k + 3, k + 4, k + 5, k + 6
    tokens = []
    for i, form in enumerate(loc_tokens, start=1):
        tokens.append({
            "index": i, "form": form,
            "head": root if i == 1 else 1,
            "deprel": "nsubj" if i == 1 else "flat",
            "ner": "B-LOCATION" if i == 1 else "I-LOCATION"})
    tokens.append({"index": comma, "form": ",", "head": 1, "deprel": "punct", "ner": "O"})
    tokens.append({"index": capital, "form": "capital", "head": 1, "deprel": "appos", "ner": "O"})
    tokens.append({"index": of, "form": "of", "head": city, "deprel": "case", "ner": "O"})
    tokens.append({"index": city, "form": big_city, "head": capital, "deprel": "nmod",
                   "ner": "B-LOCATION"})
    tokens.append({"index": is_, "form": "is", "head": root, "deprel": "aux", "ner": "O"})
    tokens.append({"index": root, "form": "flooding", "head": 0, "deprel": "root", "ner": "O"})
    return tokens


def _planned_counts(spec: SyntheticSpec) -> tuple[list[int], list[list[int]]]:
    """Per-location peak day offsets and daily mention counts. The designed
    peak count always strictly exceeds every other day, so the realized
    argmax equals the design."""
    peak_count = max(spec.peak_mentions, spec.base_daily_mentions + 2)
    shoulder = spec.base_daily_mentions + max(
        1, (peak_count - spec.base_daily_mentions) // 3)
    shoulder = min(shoulder, peak_count - 1)
    peaks = []
    counts = []
    for i in range(spec.n_locations):
        if spec.n_locations == 1:
            peak = spec.window_days // 2
        else:
            lo, hi = 4, spec.window_days - 5
            peak = lo + round(i * (hi - lo) / (spec.n_locations - 1))
        peaks.append(peak)
        daily = []
        for day in range(spec.window_days):
            count = spec.base_daily_mentions
            if day == peak:
                count = peak_count
            elif abs(day - peak) == 1:
                count = shoulder
            daily.append(count)
        counts.append(daily)
    return peaks, counts


def simulate(spec: SyntheticSpec, outdir) -> dict:
    """Write corpus.jsonl, gazetteer.tsv, regions.json, aliases.txt,
    truth.json and a ready-to-run config; returns the path map."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    beta = spec.resolved_beta()
    names = location_names(spec.n_locations)
    authors = _make_authors(spec, names, rng)
    start_day = int(iso_to_seconds(spec.start_date) // SECONDS_PER_DAY)
    peaks, counts = _planned_counts(spec)

    day_values = np.arange(spec.window_days, dtype=float)
    day_mean = float(day_values.mean())
    day_sd = float(day_values.std()) or 1.0

    gazetteer_rows = []
    for i, name in enumerate(names):
        gazetteer_rows.append("\t".join([
            str(1000 + i), name, name, "", f"{10 + i}.0", f"{-60 - i}.0",
            "P", "PPL", spec.country_code, "", f"{i:02d}", "", "", "",
            str(10_000 + 950 * i), "", "", "UTC", "2017-01-01"]))
    gazetteer_rows.append("\t".join([
        "9990", spec.big_city, spec.big_city, "", "9.0", "-59.0",
        "P", "PPL", spec.country_code, "", "99", "", "", "",
        str(spec.big_city_population), "", "", "UTC", "2017-01-01"]))
    gazetteer_rows.append("\t".join([
        "9991", spec.state_name, spec.state_name, "", "10.0", "-60.0",
        "A", "ADM1", spec.country_code, "", "00", "", "", "",
        str(spec.big_city_population + 500_000), "", "", "UTC", "2017-01-01"]))

    group_ids = [f"g{i:02d}" for i in range(spec.n_locations)] if spec.grouped else []

    post_lines = []
    truth_rows = []
    counter = 0
    for day in range(spec.window_days):
        for loc_idx, name in enumerate(names):
            for _ in range(counts[loc_idx][day]):
                author = authors[int(rng.integers(len(authors)))]
                peak = peaks[loc_idx]
                if day < peak - spec.t_buffer:
                    during, post = 0, 0
                elif day > peak + spec.t_buffer:
                    during, post = 0, 1
                else:
                    during, post = 1, 0
                has_url = bool(rng.random() < spec.url_rate)
                has_media = bool(rng.random() < spec.media_rate)
                x = {
                    "intercept": 1.0,
                    "day_z": (day - day_mean) / day_sd,
                    "during_peak": float(during),
                    "post_peak": float(post),
                    "has_url": float(has_url),
                    "has_media": float(has_media),
                    "is_organization": float(author.is_organization),
                    "is_local": float(author.is_local),
                }
                eta = sum(beta[k] * v for k, v in x.items())
                y = int(rng.random() < 1.0 / (1.0 + math.exp(-eta)))
                loc_tokens = name.split()
                if y:
                    if rng.random() < spec.modifier_share:
                        tokens = _modifier_tokens(loc_tokens, spec.big_city)
                    else:
                        state_form = spec.state_name if rng.random() < 0.5 else spec.state_abbr
                        tokens = _state_tokens(loc_tokens, state_form)
                else:
                    tokens = _plain_tokens(loc_tokens)
                timestamp = (start_day + day) * SECONDS_PER_DAY + int(rng.integers(0, SECONDS_PER_DAY))
                record = {
                    "post_id": f"p{counter:06d}",
                    "author_id": author.author_id,
                    "event_id": spec.event_id,
                    "timestamp": timestamp,
                    "text": " ".join(t["form"] for t in tokens),
                    "tokens": tokens,
                    "has_url": has_url,
                    "has_media": has_media,
                    "engagement": round(float(rng.lognormal(1.0, 1.0)), 2),
                }
                if author.profile_location is not None:
                    record["author_profile_location"] = author.profile_location
                if author.metadata is not None:
                    record["author_metadata"] = author.metadata
                if spec.grouped:
                    if rng.random() < spec.own_group_rate:
                        record["group_id"] = group_ids[loc_idx]
                    else:
                        record["group_id"] = group_ids[int(rng.integers(len(group_ids)))]
                post_lines.append(json.dumps(record, sort_keys=True,
                                             ensure_ascii=False, separators=(",", ":")))
                truth_rows.append({"post_id": record["post_id"], "y": y,
                                   "location": name, "day": day,
                                   "phase": "post" if post else ("during" if during else "pre")})
                counter += 1

    region_config = {
        "events": {
            spec.event_id: {
                "admin_units": [[spec.country_code, f"{i:02d}"] for i in range(spec.n_locations)],
                "aliases": [spec.state_name, spec.state_abbr],
                "window": [spec.start_date,
                           _iso_shift(spec.start_date, spec.window_days - 1)],
                "groups": {gid: {"admin_units": [[spec.country_code, f"{i:02d}"]]}
                           for i, gid in enumerate(group_ids)},
            }
        }
    }

    paths = {
        "corpus": outdir / "corpus.jsonl",
        "gazetteer": outdir / "gazetteer.tsv",
        "regions": outdir / "regions.json",
        "aliases": outdir / "aliases.txt",
        "truth": outdir / "truth.json",
    }
    paths["corpus"].write_text("\n".join(post_lines) + "\n", encoding="utf-8")
    paths["gazetteer"].write_text("\n".join(gazetteer_rows) + "\n", encoding="utf-8")
    paths["regions"].write_text(json.dumps(region_config, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    paths["aliases"].write_text(f"{spec.state_name}\t{spec.state_abbr}\n", encoding="utf-8")
    truth = {
        "beta": beta,
        "phase_profile": list(spec.phase_profile) if spec.phase_profile else None,
        "seed": spec.seed,
        "n_posts": counter,
        "peak_days": {names[i]: peaks[i] for i in range(spec.n_locations)},
        "rows": truth_rows,
    }
    paths["truth"].write_text(json.dumps(truth, indent=None, sort_keys=True,
                                         separators=(",", ":")) + "\n", encoding="utf-8")
    return paths


def _iso_shift(date: str, days: int) -> str:
    from .corpus import day_to_iso
    base = int(iso_to_seconds(date) // SECONDS_PER_DAY)
    return day_to_iso(base + days)
