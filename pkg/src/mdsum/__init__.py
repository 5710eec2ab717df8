"""Multi-document summarization toolkit: corpus diversity metrics, extractive
baselines, ROUGE and a desk-scale Hi-MAP model."""

from .corpus import Document, Example, MegaDocument, MegaDocumentTransformer, TruncationPolicy, load_corpus, tokenize
from .extractive import FirstKSummarizer, LexRankSummarizer, MMRSummarizer, TextRankSummarizer
from .himap import HiMapConfig, HiMapSummarizer
from .rouge import RougeConfig, RougeScore, rouge_corpus, rouge_pair, rouge_report

__version__ = "0.1.0"

__all__ = [
    "Document", "Example", "FirstKSummarizer", "HiMapConfig", "HiMapSummarizer", "LexRankSummarizer",
    "MMRSummarizer", "MegaDocument", "MegaDocumentTransformer", "RougeConfig", "RougeScore",
    "TextRankSummarizer", "TruncationPolicy", "load_corpus", "rouge_corpus", "rouge_pair", "rouge_report", "tokenize",
]
