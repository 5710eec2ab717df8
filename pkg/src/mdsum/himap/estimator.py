from __future__ import annotations

from typing import List, Optional

from sklearn.base import BaseEstimator

from ..base import check_examples, check_is_fitted
from ..corpus import TokenSeq, TruncationPolicy, truncate_example
from ..rouge import RougeConfig, rouge_corpus
from .config import HiMapConfig, Vocab, make_instance
from .params import init_params, load_checkpoint, save_checkpoint
from .train import build_instances, decode_ids, ids_to_tokens, train


class HiMapSummarizer(BaseEstimator):
    """Pointer-generator with MMR-reweighted attention, trained end to end.

    ``vocab_size`` counts the four reserved entries; the vocabulary is built
    from the training sources and summaries by frequency.
    """

    def __init__(self, vocab_size=50000, embed_dim=128, encoder_hidden=256, sentence_hidden=256,
                 decoder_hidden=512, lambda_=0.5, max_encode_tokens=500, max_decode_tokens=300,
                 renormalize=True, optimizer="adagrad", lr=0.15, epochs=1, clip=2.0, beam=4, seed=0):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.encoder_hidden = encoder_hidden
        self.sentence_hidden = sentence_hidden
        self.decoder_hidden = decoder_hidden
        self.lambda_ = lambda_
        self.max_encode_tokens = max_encode_tokens
        self.max_decode_tokens = max_decode_tokens
        self.renormalize = renormalize
        self.optimizer = optimizer
        self.lr = lr
        self.epochs = epochs
        self.clip = clip
        self.beam = beam
        self.seed = seed

    def _make_config(self, vocab_size: int) -> HiMapConfig:
        return HiMapConfig(
            vocab_size=vocab_size, embed_dim=self.embed_dim, encoder_hidden=self.encoder_hidden,
            sentence_hidden=self.sentence_hidden, decoder_hidden=self.decoder_hidden, lambda_=self.lambda_,
            max_encode_tokens=self.max_encode_tokens, max_decode_tokens=self.max_decode_tokens,
            seed=self.seed, renormalize=self.renormalize,
        )

    def fit(self, X, y=None, callback=None):
        examples = check_examples(X)
        streams = [ex.article_tokens for ex in examples] + [ex.summary.tokens for ex in examples]
        self.vocab_ = Vocab.build(streams, self.vocab_size)
        self.config_ = self._make_config(len(self.vocab_))
        self.params_ = init_params(self.config_)
        instances = build_instances(examples, self.vocab_, self.config_)
        _, self.train_log_ = train(self.params_, instances, self.config_, self.optimizer, self.lr,
                                   self.epochs, self.clip, self.seed, callback)
        return self

    def predict(self, X, beam: Optional[int] = None) -> List[TokenSeq]:
        check_is_fitted(self, "params_")
        policy = TruncationPolicy(self.config_.max_encode_tokens)
        out = []
        for ex in check_examples(X, allow_empty=True):
            inst = make_instance(self.vocab_, truncate_example(ex, policy))
            ids = decode_ids(self.params_, inst, self.config_, beam=beam or self.beam)
            out.append(ids_to_tokens(ids, self.vocab_, inst))
        return out

    def score(self, X, y=None) -> float:
        """Macro ROUGE-1 F1 of the predictions against the reference summaries."""
        examples = check_examples(X)
        hyps = self.predict(examples)
        return rouge_corpus(zip(hyps, (ex.summary.tokens for ex in examples)), RougeConfig("R1")).f1

    def save(self, path: str) -> None:
        check_is_fitted(self, "params_")
        save_checkpoint(self.params_, self.config_, path, self.vocab_)

    @classmethod
    def load(cls, path: str, **kwargs) -> "HiMapSummarizer":
        params, cfg, vocab = load_checkpoint(path)
        est = cls(vocab_size=cfg.vocab_size, embed_dim=cfg.embed_dim, encoder_hidden=cfg.encoder_hidden,
                  sentence_hidden=cfg.sentence_hidden, decoder_hidden=cfg.decoder_hidden, lambda_=cfg.lambda_,
                  max_encode_tokens=cfg.max_encode_tokens, max_decode_tokens=cfg.max_decode_tokens,
                  renormalize=cfg.renormalize, seed=cfg.seed, **kwargs)
        est.params_, est.config_ = params, cfg
        est.vocab_ = vocab if vocab is not None else Vocab.build([], cfg.vocab_size)
        return est
