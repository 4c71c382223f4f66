"""Root cause inference: example selection, prompting and reply parsing."""

from .bm25 import BM25Index, bm25_rank, bm25_scores, tokenize
from .llm import CANNED_COMPLETION, HttpLlm, LlmClient, MockLlm, prompt_hash
from .pipeline import PhaseTimer, PipelineConfig, StaticModel, analyze, diagnose, diagnose_many, prepare
from .prompt import Diagnosis, PromptBuild, assemble_prompt, estimate_tokens, parse_diagnosis

__all__ = [
    "BM25Index", "CANNED_COMPLETION", "Diagnosis", "HttpLlm", "LlmClient", "MockLlm", "PhaseTimer",
    "PipelineConfig", "PromptBuild", "StaticModel", "analyze", "assemble_prompt", "bm25_rank", "bm25_scores",
    "diagnose", "diagnose_many", "estimate_tokens", "parse_diagnosis", "prepare", "prompt_hash", "tokenize",
]
