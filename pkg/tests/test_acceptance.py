"""End-to-end acceptance checks, one test class per criterion.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import os
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from mdsum.corpus import SEPARATOR, Document, Example, TruncationPolicy, load_corpus, truncate_example
from mdsum.extractive import MmrConfig, SentencePool, lexrank, mmr_select, power_iteration, textrank
from mdsum.himap import HiMapConfig, Vocab, decode_step, encode, forward_loss, init_params
from mdsum.himap.gradcheck import gradient_check, tiny_problem
from mdsum.himap.params import load_checkpoint, save_checkpoint
from mdsum.himap.train import build_instances, lstm_step, make_copy_task, token_accuracy, train
from mdsum.rouge import RougeConfig, rouge_pair
from mdsum.textmetrics import corpus_stats, extractive_fragments, extractive_stats, novelty_report
from oracles import (
    allocation_by_redistribution,
    allocation_by_scan,
    brute_force_fragments,
    mmr_by_enumeration,
    stationary_by_eig,
    textrank_matrix,
    tfidf_cosines,
)

criterion = pytest.mark.criterion


def random_decoder_states(params, inst, cfg, rng, n):
    """Decoder states reached by feeding random inputs, plus the inputs themselves."""
    Dh = params["dec_W"].shape[0] // 4
    h, c = np.zeros((1, Dh)), np.zeros((1, Dh))
    out = []
    for _ in range(n):
        x = int(rng.integers(0, cfg.vocab_size))
        h, c = lstm_step(params["dec_W"], params["dec_b"], params["embedding"][[x]], h, c)
        out.append((h[0].copy(), x))
    return out


# ---------------------------------------------------------------------------


@criterion(1, "gradient fidelity (central differences, eps 1e-5, rel err < 1e-4, < 60 s)")
class TestGradientFidelity:
    def test_every_array_within_tolerance(self):
        start = time.perf_counter()
        worst = {}
        for seed in (0, 1):
            params, inst, cfg = tiny_problem(seed)
            assert (cfg.vocab_size, cfg.embed_dim, cfg.encoder_hidden, cfg.sentence_hidden, cfg.decoder_hidden) == (20, 4, 6, 6, 8)
            for name, err in gradient_check(params, inst, cfg, eps=1e-5, samples=20, seed=seed).items():
                worst[name] = max(worst.get(name, 0.0), err)
        elapsed = time.perf_counter() - start
        print(f"\nmax relative error {max(worst.values()):.2e} over {len(worst)} arrays in {elapsed:.1f}s")
        assert len(worst) == 23
        bad = {k: v for k, v in worst.items() if not v < 1e-4}
        assert not bad, bad
        assert elapsed < 60


@criterion(2, "distribution invariants over 1,000 random forward steps (< 30 s)")
class TestDistributionInvariants:
    def test_thousand_steps(self):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        steps = 0
        seed = 0
        while steps < 1000:
            params, inst, cfg = tiny_problem(seed)
            enc = encode(params, inst, cfg)
            for d, x in random_decoder_states(params, inst, cfg, rng, 50):
                # also probe states away from the LSTM's reachable set
                if steps % 2:
                    d = rng.normal(scale=3.0, size=d.shape)
                step = decode_step(params, enc, inst, d, x, cfg)
                for name in ("attention", "attention_mmr", "mmr", "p_vocab", "p_final"):
                    total = getattr(step, name).sum()
                    assert abs(total - 1.0) <= 1e-8, (name, total)
                assert 0.0 < step.p_gen < 1.0
                steps += 1
            seed += 1
        elapsed = time.perf_counter() - start
        print(f"\n{steps} steps over {seed} random instances in {elapsed:.1f}s")
        assert elapsed < 30


@criterion(3, "uniform-MMR neutrality (ā = a and P(w) = pointer-generator P(w), 1e-10)")
class TestUniformMmrNeutrality:
    def test_uniform_mmr_is_plain_pointer_generator(self):
        rng = np.random.default_rng(3)
        cfg = HiMapConfig(vocab_size=20, embed_dim=4, encoder_hidden=6, sentence_hidden=6, decoder_hidden=8,
                          init_scale=0.5, max_decode_tokens=40)
        words = [f"w{i}" for i in range(24)]
        vocab = Vocab.build([words[:16]], 20)
        worst_a = worst_p = 0.0
        for trial in range(20):
            # one source, so no separator token receives zero weight
            sents = [[words[j] for j in rng.integers(0, 24, size=rng.integers(1, 6))] for _ in range(rng.integers(1, 5))]
            ex = Example("u", [Document(sents)], Document([sents[0]]))
            inst = build_instances([ex], vocab, cfg)[0]
            assert SEPARATOR not in ex.article_tokens
            params = init_params(cfg, seed=trial)
            enc = encode(params, inst, cfg)
            n = inst.n_sentences
            for d, x in random_decoder_states(params, inst, cfg, rng, 5):
                hm = decode_step(params, enc, inst, d, x, cfg, mmr_override=np.full(n, 1.0 / n))
                pg = decode_step(params, enc, inst, d, x, cfg, use_mmr=False)
                worst_a = max(worst_a, np.abs(hm.attention_mmr - hm.attention).max())
                worst_p = max(worst_p, np.abs(hm.p_final - pg.p_final).max())
        print(f"\nmax |ā - a| = {worst_a:.1e}, max |ΔP(w)| = {worst_p:.1e}")
        assert worst_a <= 1e-10
        assert worst_p <= 1e-10


@pytest.fixture(scope="module")
def copy_run():
    examples = make_copy_task(n_examples=200, n_symbols=30, seed=0)
    assert all(len(ex.sources) == 2 and all(len(d.sentences) == 2 for d in ex.sources) for ex in examples)
    assert all(ex.summary.tokens == ex.sources[0].sentences[0] + ex.sources[1].sentences[0] for ex in examples)
    vocab = Vocab.build([ex.article_tokens for ex in examples], 40)
    cfg = HiMapConfig(vocab_size=len(vocab), embed_dim=16, encoder_hidden=16, sentence_hidden=16,
                      decoder_hidden=32, max_encode_tokens=100, max_decode_tokens=20, seed=0)
    instances = build_instances(examples, vocab, cfg)
    params = init_params(cfg)
    accuracy = []

    def check(epoch, loss):
        if epoch % 10:
            return False
        accuracy.append((epoch, token_accuracy(params, instances, cfg)))
        return epoch >= 30 and accuracy[-1][1] >= 0.9

    start = time.perf_counter()
    _, log = train(params, instances, cfg, optimizer="adagrad", lr=0.15, epochs=500, clip=2.0, seed=0, callback=check)
    elapsed = time.perf_counter() - start
    return log, accuracy, elapsed


@pytest.mark.slow
@criterion(4, "copy task: >= 90% greedy token accuracy within 500 epochs, < 5 min, non-increasing 10-epoch loss")
class TestCopyTask:
    def test_accuracy(self, copy_run):
        log, accuracy, elapsed = copy_run
        print(f"\naccuracy by epoch {accuracy}; {len(log.losses)} epochs in {elapsed:.1f}s")
        assert accuracy and accuracy[-1][1] >= 0.9
        assert len(log.losses) <= 500

    def test_runtime(self, copy_run):
        assert copy_run[2] < 300

    def test_windowed_loss_non_increasing(self, copy_run):
        means = copy_run[0].window_means(10)
        print(f"\n10-epoch mean losses {[round(m, 6) for m in means]}")
        assert len(means) >= 3
        assert all(b <= a for a, b in zip(means, means[1:]))


@criterion(5, "MMR selection equals exhaustive enumeration on 100 random pools")
class TestMmrOracle:
    def test_hundred_pools(self):
        rng = random.Random(5)
        for trial in range(100):
            n = rng.randint(1, 6)
            vocab = "abcdefghij"[: rng.randint(3, 10)]
            sents = [[rng.choice(vocab) for _ in range(rng.randint(1, 7))] for _ in range(n)]
            lam = rng.choice([0.0, 1.0, round(rng.random(), 3)])
            sim, rel = tfidf_cosines(sents)
            sim = [[min(1.0, max(0.0, v)) for v in row] for row in sim]
            expected = mmr_by_enumeration(rel, sim, lam)
            pool = SentencePool(sents)
            assert mmr_select(pool, MmrConfig(lambda_=lam)) == expected, (sents, lam)
            budget = rng.randint(1, sum(map(len, sents)))
            prefix, used = [], 0
            for i in expected:
                if used >= budget:
                    break
                prefix.append(i)
                used += len(sents[i])
            assert mmr_select(pool, MmrConfig(lambda_=lam, budget=budget)) == prefix


@criterion(6, "LexRank/TextRank match a dense stationary solve (1e-6 L-inf); equal-weight graphs uniform (1e-9)")
class TestGraphOracle:
    def pools(self):
        rng = random.Random(6)
        for _ in range(100):
            n = rng.randint(1, 10)
            vocab = "abcdefghijkl"[: rng.randint(2, 12)]
            yield [[rng.choice(vocab) for _ in range(rng.randint(1, 8))] for _ in range(n)]

    def test_lexrank(self):
        worst = 0.0
        for sents in self.pools():
            sim, _ = tfidf_cosines(sents)
            W = np.clip(np.array(sim), 0, 1)
            np.fill_diagonal(W, 0)
            got = lexrank(SentencePool(sents)).scores
            worst = max(worst, np.abs(got - stationary_by_eig(W, 0.15)).max())
        print(f"\nLexRank max L-inf error {worst:.1e}")
        assert worst <= 1e-6

    def test_textrank(self):
        worst = 0.0
        for sents in self.pools():
            got = textrank(SentencePool(sents)).scores
            worst = max(worst, np.abs(got - stationary_by_eig(textrank_matrix(sents), 0.15)).max())
        print(f"\nTextRank max L-inf error {worst:.1e}")
        assert worst <= 1e-6

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
    def test_complete_equal_weight_graph_is_uniform(self, n):
        sents = [["a", "b", "c"]] * n
        for scores in (lexrank(SentencePool(sents)).scores, textrank(SentencePool(sents)).scores,
                       power_iteration(np.full((n, n), 0.7) - 0.7 * np.eye(n)).scores):
            assert np.abs(scores - 1.0 / n).max() <= 1e-9


@criterion(7, "fragments and diversity stats match the brute-force oracle on 200 random pairs")
class TestFragmentOracle:
    def test_worked_example(self):
        s = extractive_stats(list("abcd"), list("bcea"))
        assert s.coverage == 0.75 and s.density == 1.25

    def test_random_pairs(self):
        rng = random.Random(7)
        for _ in range(200):
            vocab = "abcdef"[: rng.randint(1, 6)]
            article = [rng.choice(vocab) for _ in range(rng.randint(1, 40))]
            summary = [rng.choice(vocab) for _ in range(rng.randint(1, 40))]
            frags = brute_force_fragments(article, summary)
            assert [tuple(f) for f in extractive_fragments(article, summary)] == frags
            s = extractive_stats(article, summary)
            assert s.coverage == pytest.approx(sum(f[2] for f in frags) / len(summary), abs=1e-12)
            assert s.density == pytest.approx(sum(f[2] ** 2 for f in frags) / len(summary), abs=1e-12)
            assert s.compression == pytest.approx(len(article) / len(summary), abs=1e-12)


F = Fraction
# hyp, ref, then (P, R) for R-1, R-2 and R-SU(4), each enumerated by hand
GOLDEN = [
    ("the cat sat", "the cat sat", (1, 1), (1, 1), (1, 1)),
    ("the cat", "the cat sat", (1, F(2, 3)), (1, F(1, 2)), (1, F(1, 2))),
    ("a b c", "a c b", (1, 1), (0, 0), (F(5, 6), F(5, 6))),
    ("x y", "a b", (0, 0), (0, 0), (0, 0)),
    ("", "a", (0, 0), (0, 0), (0, 0)),
    ("a a a", "a", (F(1, 3), 1), (0, 0), (F(1, 6), 1)),
    ("a b a b", "a b", (F(1, 2), 1), (F(1, 3), 1), (F(3, 10), 1)),
    ("a b", "a b a b", (1, F(1, 2)), (1, F(1, 3)), (1, F(3, 10))),
    ("a b c d e f g", "a g", (F(2, 7), 1), (0, 0), (F(2, 27), F(2, 3))),
    ("a b c d e f", "a f", (F(1, 3), 1), (0, 0), (F(1, 7), 1)),
    ("the cat sat on the mat", "the cat is on the mat", (F(5, 6), F(5, 6)), (F(3, 5), F(3, 5)), (F(5, 7), F(5, 7))),
    ("b a", "a b", (1, 1), (0, 0), (F(2, 3), F(2, 3))),
    ("a", "a", (1, 1), (0, 0), (1, 1)),
    ("a b c", "a b c d", (1, F(3, 4)), (1, F(2, 3)), (1, F(3, 5))),
    ("a x b", "a b", (F(2, 3), 1), (0, 0), (F(1, 2), 1)),
    ("a b a", "a a b", (1, 1), (F(1, 2), F(1, 2)), (F(5, 6), F(5, 6))),
    ("a b c d e f g", "a b c d e f g", (1, 1), (1, 1), (1, 1)),
    ("x a b", "a b c d", (F(2, 3), F(1, 2)), (F(1, 2), F(1, 3)), (F(1, 2), F(3, 10))),
    ("a b c d e f g", "g f e d c b a", (1, 1), (0, 0), (F(7, 27), F(7, 27))),
    ("a a b b", "a b b b", (F(3, 4), F(3, 4)), (F(2, 3), F(2, 3)), (F(7, 10), F(7, 10))),
]


@criterion(8, "ROUGE golden suite: 20 hand-enumerated cases exact to 1e-9")
class TestRougeGolden:
    @pytest.mark.parametrize("hyp,ref,r1,r2,rsu", GOLDEN, ids=[f"case{i + 1}" for i in range(len(GOLDEN))])
    def test_case(self, hyp, ref, r1, r2, rsu):
        for variant, (p, r) in (("R1", r1), ("R2", r2), ("RSU", rsu)):
            p, r = F(p), F(r)
            f1 = 2 * p * r / (p + r) if p + r else F(0)
            got = rouge_pair(hyp.split(), ref.split(), RougeConfig(variant=variant, skip_distance=4))
            assert abs(got.precision - float(p)) <= 1e-9, variant
            assert abs(got.recall - float(r)) <= 1e-9, variant
            assert abs(got.f1 - float(f1)) <= 1e-9, variant


@criterion(9, "truncation matches the redistribution simulation on 100 random Examples")
class TestTruncationOracle:
    def test_random_examples(self):
        rng = random.Random(9)
        for trial in range(100):
            n_src = rng.randint(1, 10)
            docs = []
            for d in range(n_src):
                sents = [[f"d{d}s{s}t{t}" for t in range(rng.randint(1, 30))] for s in range(rng.randint(1, 12))]
                docs.append(Document(sents))
            ex = Example(str(trial), docs, Document([["x"]]))
            budget = rng.choice([rng.randint(1, 50), rng.randint(1, 800), 500])
            lengths = [len(d) for d in docs]
            mega = truncate_example(ex, TruncationPolicy(budget))
            assert mega.allocation == allocation_by_redistribution(lengths, budget) == allocation_by_scan(lengths, budget)
            content = [t for t in mega.tokens if t != SEPARATOR]
            assert len(content) == min(budget, sum(lengths))
            # each source contributes its own prefix
            for d, doc in enumerate(docs):
                mine = [t for t in content if t.startswith(f"d{d}s")]
                assert mine == doc.tokens[: mega.allocation[d]]


@criterion(10, "checkpoint round-trip is bit-identical, forward loss identical")
class TestCheckpointRoundTrip:
    def test_round_trip(self, tmp_path):
        params, inst, cfg = tiny_problem(seed=10)
        vocab = Vocab.build([[f"w{i}" for i in range(16)]], cfg.vocab_size)
        path = tmp_path / "model.json"
        save_checkpoint(params, cfg, str(path), vocab)
        loaded, cfg2, vocab2 = load_checkpoint(str(path))
        assert cfg2.to_dict() == cfg.to_dict()
        assert vocab2.words == vocab.words
        assert sorted(loaded) == sorted(params)
        for name in params:
            assert loaded[name].dtype == params[name].dtype and loaded[name].shape == params[name].shape
            assert loaded[name].tobytes() == params[name].tobytes(), name
        before = forward_loss(params, inst, cfg)[0]
        after = forward_loss(loaded, inst, cfg2)[0]
        assert np.float64(before).tobytes() == np.float64(after).tobytes()


FULL_CORPUS = os.environ.get("MDSUM_FULL_CORPUS")
REFERENCE_STATS = {"words_doc": 2103.49, "words_summary": 263.66}
REFERENCE_NOVELTY = {1: 17.76, 2: 57.10, 3: 75.71, 4: 82.30}


@criterion(11, "OPTIONAL full-corpus statistics (needs MDSUM_FULL_CORPUS, non-gating)")
@pytest.mark.skipif(not FULL_CORPUS, reason="set MDSUM_FULL_CORPUS to a JSONL training split")
class TestFullCorpus:
    def test_statistics(self):
        stats = corpus_stats(load_corpus(FULL_CORPUS, lenient=True))
        for key, ref in REFERENCE_STATS.items():
            got = getattr(stats, key)
            print(f"\n{key}: {got:.2f} vs {ref}")
            assert abs(got - ref) / ref <= 0.03

    def test_novelty(self):
        report = novelty_report(load_corpus(FULL_CORPUS, lenient=True))
        for n, ref in REFERENCE_NOVELTY.items():
            print(f"\n{n}-grams novel: {report[n]:.2f} vs {ref}")
            assert abs(report[n] - ref) <= 2.0
