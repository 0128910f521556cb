"""geosalience: collective-attention analytics over location mentions."""

__version__ = "0.1.0"

from .corpus import (AnnotatedPost, SchemaError, Token, dependency_tree,
                     parse_post_record, serialize_post, validate_corpus)
from .gazetteer import (GazetteerEntry, GazetteerIndex, RegionSpec,
                        ResolutionResult, StateAliasTable, build_index,
                        population_of, resolve, resolve_best)
from .mentions import LocationMention, extract_mentions, extraction_stats
from .descriptors import (DescriptorMatch, PatternConfig, PatternKind,
                          annotate_mentions, evaluate_against_gold,
                          match_descriptors)
from .timeline import (PeakInfo, Phase, TimelineSeries, build_timeline,
                       descriptor_rate_series, filter_sparse_locations,
                       find_peak, phase_of)
from .authors import (AuthorProfile, classify_local, classify_organization,
                      posted_in_all_phases, select_active_authors)
from .features import (AnalysisSpec, DesignMatrix, FeatureRow,
                       bin_rare_categories, build_rows, encode)
from .glm import (FitResult, PenaltySpec, balanced_accuracy, deviance_report,
                  fit, grid_search_l2, holm_correction, standard_errors)
from .simulate import SyntheticSpec, simulate
from .pipeline import RunConfig, run

__all__ = [
    "AnnotatedPost", "SchemaError", "Token", "dependency_tree",
    "parse_post_record", "serialize_post", "validate_corpus",
    "GazetteerEntry", "GazetteerIndex", "RegionSpec", "ResolutionResult",
    "StateAliasTable", "build_index", "population_of", "resolve",
    "resolve_best",
    "LocationMention", "extract_mentions", "extraction_stats",
    "DescriptorMatch", "PatternConfig", "PatternKind", "annotate_mentions",
    "evaluate_against_gold", "match_descriptors",
    "PeakInfo", "Phase", "TimelineSeries", "build_timeline",
    "descriptor_rate_series", "filter_sparse_locations", "find_peak",
    "phase_of",
    "AuthorProfile", "classify_local", "classify_organization",
    "posted_in_all_phases", "select_active_authors",
    "AnalysisSpec", "DesignMatrix", "FeatureRow", "bin_rare_categories",
    "build_rows", "encode",
    "FitResult", "PenaltySpec", "balanced_accuracy", "deviance_report",
    "fit", "grid_search_l2", "holm_correction", "standard_errors",
    "SyntheticSpec", "simulate",
    "RunConfig", "run",
]
