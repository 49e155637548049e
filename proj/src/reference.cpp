#include "semform/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "semform/error.hpp"

namespace semform::reference {

std::vector<double> pair_scores_serial(std::span<const std::string> candidates,
                                       std::span<const std::string> references, Metric metric,
                                       const MetricOptions& opts) {
    if (candidates.size() != references.size())
        throw DataError(fmt::format("pair_scores: {} candidates for {} references", candidates.size(), references.size()));
    if (metric == Metric::Cosine) throw DomainError("pair_scores: cosine needs embeddings");
    std::vector<double> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out.push_back(metric == Metric::Bleu ? bleu(candidates[i], references[i], opts.bleu)
                                             : chrf(candidates[i], references[i], opts.chrf));
    return out;
}

PairwiseMatrix pairwise_matrix_serial(std::span<const TransformedCorpus> corpora, Metric metric,
                                      const Embedder* embedder, const MetricOptions& opts) {
    PairwiseMatrix m;
    m.metric = metric;
    for (const auto& c : corpora) m.labels.push_back(c.kind);
    for (std::size_t i = 1; i < corpora.size(); ++i) require_same_ids(corpora[0], corpora[i]);
    if (metric == Metric::Cosine && !embedder) throw DomainError("cosine matrix needs an embedding provider");

    const std::size_t k = corpora.size();
    std::vector<std::vector<std::string>> texts(k);
    for (std::size_t i = 0; i < k; ++i) {
        std::map<std::string, const std::string*> by_id;
        for (const auto& item : corpora[i].items) by_id[item.source_id] = &item.text;
        for (const auto& item : corpora[0].items) texts[i].push_back(*by_id.at(item.source_id));
    }
    std::vector<std::vector<EmbeddingVector>> emb(k);
    if (metric == Metric::Cosine)
        for (std::size_t i = 0; i < k; ++i)
            for (const auto& t : texts[i]) emb[i].push_back(embedder->embed(t));

    m.values.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t n = texts[i].size();
            if (n == 0) throw DataError("pairwise matrix over empty corpora");
            double sum = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                switch (metric) {
                    case Metric::Bleu: sum += bleu(texts[j][p], texts[i][p], opts.bleu); break;
                    case Metric::Chrf: sum += chrf(texts[j][p], texts[i][p], opts.chrf); break;
                    case Metric::Cosine: sum += cosine(emb[j][p], emb[i][p]); break;
                }
            }
            m.values[i][j] = sum / static_cast<double>(n);
        }
    }
    return m;
}

double wilcoxon_exact_p_serial(std::span<const double> ranks, double w_plus) {
    const std::size_t n = ranks.size();
    if (n == 0) throw DomainError("wilcoxon_exact_p: no ranks");
    if (n > 62) throw DomainError("wilcoxon_exact_p: too many ranks for enumeration");
    std::vector<std::int64_t> twice(n);
    for (std::size_t i = 0; i < n; ++i) twice[i] = std::llround(2.0 * ranks[i]);
    const std::int64_t target = std::llround(2.0 * w_plus);
    const std::int64_t patterns = std::int64_t{1} << n;
    std::int64_t le = 0, ge = 0;
    for (std::int64_t mask = 0; mask < patterns; ++mask) {
        std::int64_t s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::int64_t{1} << i)) s += twice[i];
        le += (s <= target);
        ge += (s >= target);
    }
    return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(patterns));
}

std::vector<ClassificationRun> cross_validate_serial(const TransformedCorpus& corpus, const Dataset& d, int k,
                                                     std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                                     const TrainConfig& cfg) {
    return detail::cross_validate_impl(corpus, d, k, seeds, embedder, cfg, false);
}

}  // namespace semform::reference
