#include "semform/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "semform/error.hpp"
#include "semform/lexstats.hpp"
#include "semform/parallel.hpp"

namespace semform {

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::Bleu: return "bleu";
        case Metric::Chrf: return "chrf";
        case Metric::Cosine: return "cosine";
    }
    return "unknown";
}

namespace {

// n-grams keyed by their tokens joined with a unit separator.
std::map<std::string, int> word_ngrams(std::span<const std::string> tokens, std::size_t n) {
    std::map<std::string, int> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t j = 1; j < n; ++j) {
            key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

std::u32string strip_whitespace_codepoints(std::string_view s) {
    std::u32string out;
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t i = 0;
    while (i < len) {
        UChar32 c;
        U8_NEXT(bytes, i, len, c);
        if (c < 0) c = 0xFFFD;
        if (!u_isUWhiteSpace(c)) out.push_back(static_cast<char32_t>(c));
    }
    return out;
}

std::map<std::u32string, int> char_ngrams(const std::u32string& chars, std::size_t n) {
    std::map<std::u32string, int> counts;
    if (chars.size() < n) return counts;
    for (std::size_t i = 0; i + n <= chars.size(); ++i) ++counts[chars.substr(i, n)];
    return counts;
}

template <class Map>
int clipped_matches(const Map& cand, const Map& ref) {
    int m = 0;
    for (const auto& [g, c] : cand)
        if (auto it = ref.find(g); it != ref.end()) m += std::min(c, it->second);
    return m;
}

}  // namespace

double bleu_tokens(std::span<const std::string> candidate, std::span<const std::string> reference,
                   const BleuOptions& opts) {
    if (candidate.empty() || reference.empty()) throw DomainError("bleu: empty tokenization");
    if (opts.max_n < 1) throw DomainError("bleu: max_n must be >= 1");
    const std::size_t c = candidate.size();
    const std::size_t r = reference.size();
    double log_sum = 0.0;
    int orders = 0;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(opts.max_n) && n <= c; ++n) {
        const auto cand = word_ngrams(candidate, n);
        const auto ref = word_ngrams(reference, n);
        const double total = static_cast<double>(c - n + 1);
        double matches = clipped_matches(cand, ref);
        if (matches == 0.0) {
            if (!opts.smoothing) return 0.0;
            matches = opts.epsilon;
        }
        log_sum += std::log(matches / total);
        ++orders;
    }
    const double brevity = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return std::clamp(brevity * std::exp(log_sum / orders), 0.0, 1.0);
}

double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& opts) {
    const Tokenizer tok;
    return bleu_tokens(tok.tokenize(candidate), tok.tokenize(reference), opts);
}

double chrf(std::string_view candidate, std::string_view reference, const ChrfOptions& opts) {
    if (opts.max_n < 1) throw DomainError("chrf: max_n must be >= 1");
    if (!(opts.beta > 0)) throw DomainError("chrf: beta must be > 0");
    const auto cand = strip_whitespace_codepoints(candidate);
    const auto ref = strip_whitespace_codepoints(reference);
    if (cand.empty() || ref.empty()) throw DomainError("chrf: empty input after whitespace removal");
    double precision = 0.0;
    double recall = 0.0;
    int orders = 0;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(opts.max_n); ++n) {
        if (cand.size() < n || ref.size() < n) break;
        const auto cg = char_ngrams(cand, n);
        const auto rg = char_ngrams(ref, n);
        const double m = clipped_matches(cg, rg);
        precision += m / static_cast<double>(cand.size() - n + 1);
        recall += m / static_cast<double>(ref.size() - n + 1);
        ++orders;
    }
    precision /= orders;
    recall /= orders;
    if (precision + recall == 0.0) return 0.0;
    const double b2 = opts.beta * opts.beta;
    return std::clamp((1.0 + b2) * precision * recall / (b2 * precision + recall), 0.0, 1.0);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DomainError(fmt::format("cosine: dimension mismatch ({} vs {})", a.size(), b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine: zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.view(), b.view()); }

std::vector<double> pair_scores(std::span<const std::string> candidates, std::span<const std::string> references,
                                Metric metric, const MetricOptions& opts) {
    if (candidates.size() != references.size())
        throw DataError(fmt::format("pair_scores: {} candidates for {} references", candidates.size(), references.size()));
    if (metric == Metric::Cosine) throw DomainError("pair_scores: cosine needs embeddings");
    std::vector<double> out(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) {
        out[i] = metric == Metric::Bleu ? bleu(candidates[i], references[i], opts.bleu)
                                        : chrf(candidates[i], references[i], opts.chrf);
    });
    return out;
}

std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, const Embedder& embedder) {
    std::vector<EmbeddingVector> out(texts.size());
    parallel_for(texts.size(), [&](std::size_t i) { out[i] = embedder.embed(texts[i]); });
    return out;
}

void require_same_ids(const TransformedCorpus& a, const TransformedCorpus& b) {
    std::set<std::string> ia, ib;
    for (const auto& i : a.items) ia.insert(i.source_id);
    for (const auto& i : b.items) ib.insert(i.source_id);
    if (ia == ib && ia.size() == a.items.size() && ib.size() == b.items.size()) return;
    std::vector<std::string> only_a, only_b;
    std::set_difference(ia.begin(), ia.end(), ib.begin(), ib.end(), std::back_inserter(only_a));
    std::set_difference(ib.begin(), ib.end(), ia.begin(), ia.end(), std::back_inserter(only_b));
    throw DataError(fmt::format("corpora {} and {} differ in ids; missing from {}: [{}]; missing from {}: [{}]",
                                to_string(a.kind), to_string(b.kind), to_string(b.kind), fmt::join(only_a, ", "),
                                to_string(a.kind), fmt::join(only_b, ", ")));
}

namespace {

std::vector<std::string> aligned_texts(const TransformedCorpus& reference, const TransformedCorpus& other) {
    std::vector<std::string> out;
    out.reserve(reference.items.size());
    std::map<std::string_view, const std::string*> by_id;
    for (const auto& i : other.items) by_id[i.source_id] = &i.text;
    for (const auto& i : reference.items) out.push_back(*by_id.at(i.source_id));
    return out;
}

double average(const std::vector<double>& xs) {
    if (xs.empty()) throw DataError("mean similarity over an empty corpus");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

std::vector<double> paired_scores(const TransformedCorpus& reference, const TransformedCorpus& candidate,
                                  Metric metric, const Embedder* embedder, const MetricOptions& opts) {
    require_same_ids(reference, candidate);
    const auto refs = reference.texts();
    const auto cands = aligned_texts(reference, candidate);
    if (metric != Metric::Cosine) return pair_scores(cands, refs, metric, opts);
    if (!embedder) throw DomainError("cosine similarity needs an embedding provider");
    const auto er = embed_all(refs, *embedder);
    const auto ec = embed_all(cands, *embedder);
    std::vector<double> out(refs.size());
    parallel_for(refs.size(), [&](std::size_t i) { out[i] = cosine(ec[i], er[i]); });
    return out;
}

double mean_similarity(const TransformedCorpus& reference, const TransformedCorpus& candidate, Metric metric,
                       const Embedder* embedder, const MetricOptions& opts) {
    return average(paired_scores(reference, candidate, metric, embedder, opts));
}

PairwiseMatrix pairwise_matrix(std::span<const TransformedCorpus> corpora, Metric metric, const Embedder* embedder,
                               const MetricOptions& opts) {
    const std::size_t k = corpora.size();
    PairwiseMatrix m;
    m.metric = metric;
    for (const auto& c : corpora) m.labels.push_back(c.kind);
    for (std::size_t i = 1; i < k; ++i) require_same_ids(corpora[0], corpora[i]);
    if (metric == Metric::Cosine && !embedder) throw DomainError("cosine matrix needs an embedding provider");

    // Everything aligned to corpus 0's id order.
    std::vector<std::vector<std::string>> texts(k);
    for (std::size_t i = 0; i < k; ++i) texts[i] = aligned_texts(corpora[0], corpora[i]);
    std::vector<std::vector<EmbeddingVector>> embeddings(k);
    if (metric == Metric::Cosine)
        for (std::size_t i = 0; i < k; ++i) embeddings[i] = embed_all(texts[i], *embedder);

    m.values.assign(k, std::vector<double>(k, 0.0));
    parallel_for(k * k, [&](std::size_t cell) {
        const std::size_t i = cell / k;
        const std::size_t j = cell % k;
        const std::size_t n = texts[i].size();
        double sum = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            switch (metric) {
                case Metric::Bleu: sum += bleu(texts[j][p], texts[i][p], opts.bleu); break;
                case Metric::Chrf: sum += chrf(texts[j][p], texts[i][p], opts.chrf); break;
                case Metric::Cosine: sum += cosine(embeddings[j][p], embeddings[i][p]); break;
            }
        }
        if (n == 0) throw DataError("pairwise matrix over empty corpora");
        m.values[i][j] = sum / static_cast<double>(n);
    });
    return m;
}

}  // namespace semform
