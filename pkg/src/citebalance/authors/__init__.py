"""Author identity resolution and gender labelling."""

from .gender import (
    CATEGORIES,
    CATEGORY_NAMES,
    DEFAULT_THRESHOLD,
    GenderAssignment,
    GenderCategory,
    GenderResolver,
    Label,
    LocalGenderTable,
    RemoteGenderService,
    SourceUnavailable,
    StaticSource,
    assign_gender,
    categorize_labels,
    categorize_paper,
    label_for_probability,
    load_overrides,
)
from .names import (
    INITIALS_ONLY,
    AuthorIdentity,
    Authorship,
    NameEntry,
    NicknameTable,
    disambiguate,
    fold,
    merge_name_variants,
    parse_author_name,
    resolve_initials,
    seniority,
    seniority_counts,
    team_productivity,
)

__all__ = [
    "CATEGORIES",
    "CATEGORY_NAMES",
    "DEFAULT_THRESHOLD",
    "INITIALS_ONLY",
    "AuthorIdentity",
    "Authorship",
    "GenderAssignment",
    "GenderCategory",
    "GenderResolver",
    "Label",
    "LocalGenderTable",
    "NameEntry",
    "NicknameTable",
    "RemoteGenderService",
    "SourceUnavailable",
    "StaticSource",
    "assign_gender",
    "categorize_labels",
    "categorize_paper",
    "disambiguate",
    "fold",
    "label_for_probability",
    "load_overrides",
    "merge_name_variants",
    "parse_author_name",
    "resolve_initials",
    "seniority",
    "seniority_counts",
    "team_productivity",
]
