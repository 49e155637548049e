// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <functional>
#include <random>

#include "semform/classifier.hpp"
#include "semform/reference.hpp"
#include "semform/stattests.hpp"
#include "semform/textmetrics.hpp"

using namespace semform;

namespace {

const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> v{"the", "boy", "dog", "saw", "a", "puppy", "ran", "home", "mother",
                                            "found", "it", "and", "hid", "cookie", "jar", "sink", "water",
                                            "window", "girl", "stool", "plate", "cup", "floor", "kitchen"};
    return v;
}

std::vector<std::string> sentences(std::size_t count, std::uint64_t seed, std::size_t words = 40) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, vocabulary().size() - 1);
    std::vector<std::string> out(count);
    for (auto& s : out)
        for (std::size_t i = 0; i < words; ++i) s += (i ? " " : "") + vocabulary()[pick(rng)];
    return out;
}

TransformedCorpus corpus(TransformationKind kind, std::size_t n, std::uint64_t seed) {
    TransformedCorpus c;
    c.kind = kind;
    c.dataset_name = "bench";
    c.language = "en";
    const auto texts = sentences(n, seed);
    for (std::size_t i = 0; i < n; ++i) c.items.push_back({"d" + std::to_string(i), texts[i], {}});
    return c;
}

/// Hashed bag of words.
class HashEmbedder final : public Embedder {
public:
    EmbeddingVector embed(std::string_view text) const override {
        EmbeddingVector v;
        v.values.assign(64, 0.0);
        std::size_t start = 0;
        while (start < text.size()) {
            const auto end = std::min(text.find(' ', start), text.size());
            v.values[std::hash<std::string_view>{}(text.substr(start, end - start)) % 64] += 1.0;
            start = end + 1;
        }
        return v;
    }
};

struct CvInput {
    Dataset dataset;
    TransformedCorpus corpus;
    std::vector<std::uint64_t> seeds = run_seeds(0, 10);
};

const CvInput& cv_input() {
    static const CvInput in = [] {
        CvInput c;
        c.dataset.name = "bench";
        c.dataset.source_language = "en";
        c.corpus = corpus(TransformationKind::Original, 140, 3);
        for (std::size_t i = 0; i < c.corpus.items.size(); ++i) {
            const bool ad = i % 6 == 0;
            auto& item = c.corpus.items[i];
            if (ad) item.text += " cookie jar stool";
            c.dataset.transcripts.push_back({item.source_id, item.text, ad ? Group::AD : Group::Control, std::nullopt, "en"});
        }
        return c;
    }();
    return in;
}

const std::vector<TransformedCorpus>& matrix_input() {
    static const std::vector<TransformedCorpus> in = [] {
        std::vector<TransformedCorpus> v;
        std::uint64_t seed = 10;
        for (auto k : kAllKinds) v.push_back(corpus(k, 60, seed++));
        return v;
    }();
    return in;
}

template <bool Serial>
void BM_PairScores(benchmark::State& state) {
    const auto cand = sentences(static_cast<std::size_t>(state.range(0)), 1);
    const auto ref = sentences(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        auto s = Serial ? reference::pair_scores_serial(cand, ref, Metric::Chrf) : pair_scores(cand, ref, Metric::Chrf);
        benchmark::DoNotOptimize(s.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Serial>
void BM_PairwiseMatrix(benchmark::State& state) {
    const auto& corpora = matrix_input();
    for (auto _ : state) {
        auto m = Serial ? reference::pairwise_matrix_serial(corpora, Metric::Bleu) : pairwise_matrix(corpora, Metric::Bleu);
        benchmark::DoNotOptimize(m.values.data());
    }
}

template <bool Serial>
void BM_WilcoxonExact(benchmark::State& state) {
    std::vector<double> ranks(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<double>(i + 1);
    const double w = static_cast<double>(ranks.size() * (ranks.size() + 1) / 8);
    for (auto _ : state) {
        double p = Serial ? reference::wilcoxon_exact_p_serial(ranks, w) : wilcoxon_exact_p(ranks, w);
        benchmark::DoNotOptimize(p);
    }
}

template <bool Serial>
void BM_CrossValidate(benchmark::State& state) {
    const auto& in = cv_input();
    const HashEmbedder embedder;
    TrainConfig cfg;
    cfg.max_epochs = 30;
    for (auto _ : state) {
        auto runs = Serial ? reference::cross_validate_serial(in.corpus, in.dataset, 5, in.seeds, embedder, cfg)
                           : cross_validate(in.corpus, in.dataset, 5, in.seeds, embedder, cfg);
        benchmark::DoNotOptimize(runs.data());
    }
}

}  // namespace

BENCHMARK(BM_PairScores<true>)->Name("pair_scores/serial")->Arg(200);
BENCHMARK(BM_PairScores<false>)->Name("pair_scores/openmp")->Arg(200);
BENCHMARK(BM_PairwiseMatrix<true>)->Name("pairwise_matrix/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairwiseMatrix<false>)->Name("pairwise_matrix/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_WilcoxonExact<true>)->Name("wilcoxon_exact/serial")->Arg(16)->Arg(20);
BENCHMARK(BM_WilcoxonExact<false>)->Name("wilcoxon_exact/openmp")->Arg(16)->Arg(20);
BENCHMARK(BM_CrossValidate<true>)->Name("cross_validate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CrossValidate<false>)->Name("cross_validate/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
