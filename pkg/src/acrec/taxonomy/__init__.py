from importlib import resources

from .extraction import (
    AuditWorksheet,
    ExtractionPipeline,
    ExtractionResult,
    FixtureLlmClient,
    HttpLlmClient,
    LexiconExtractor,
    LlmRefusalError,
    PromptTemplates,
    audit_sample,
    classify_emotions,
    extract_statements,
)
from .lexicon import LEXICON, classify_text
from .statements import (
    ACStatement,
    StatementRepository,
    load_category_distribution,
    load_statements,
    save_statements,
)
from .wheel import ADDED_CATEGORIES, OTHER, EmotionCategory, category_names, wheel, wheel_payload


def published_distribution_path() -> str:
    """Path of the shipped per-category statement count table."""
    return str(resources.files("acrec.taxonomy") / "data" / "emotion_distribution.json")


__all__ = [
    "EmotionCategory",
    "wheel",
    "wheel_payload",
    "category_names",
    "ADDED_CATEGORIES",
    "OTHER",
    "LEXICON",
    "classify_text",
    "ACStatement",
    "StatementRepository",
    "load_statements",
    "save_statements",
    "load_category_distribution",
    "published_distribution_path",
    "ExtractionPipeline",
    "ExtractionResult",
    "FixtureLlmClient",
    "HttpLlmClient",
    "LexiconExtractor",
    "LlmRefusalError",
    "PromptTemplates",
    "audit_sample",
    "AuditWorksheet",
    "classify_emotions",
    "extract_statements",
]
