#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semform/embedding.hpp"
#include "semform/transformed_corpus.hpp"

namespace semform {

enum class Metric { Bleu, Chrf, Cosine };

std::string_view to_string(Metric m);

struct BleuOptions {
    int max_n = 4;
    /// Diagnostics only: zero-match orders get `epsilon` matches instead of
    /// forcing the score to 0.
    bool smoothing = false;
    double epsilon = 0.1;
};

struct ChrfOptions {
    int max_n = 6;
    double beta = 2.0;
};

/// Sentence BLEU over lexstats tokens. Orders 1..max_n are included when the
/// candidate has at least one n-gram of that order; any included order with
/// zero clipped matches gives 0 (unless smoothing). Brevity penalty
/// exp(1 - r/c) when c < r.
double bleu(std::string_view candidate, std::string_view reference, const BleuOptions& opts = {});
double bleu_tokens(std::span<const std::string> candidate, std::span<const std::string> reference,
                   const BleuOptions& opts = {});

/// Character n-gram F-beta with whitespace removed. Precision and recall are
/// averaged over the orders 1..max_n for which both sides have at least one
/// n-gram, then combined.
double chrf(std::string_view candidate, std::string_view reference, const ChrfOptions& opts = {});

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine(std::span<const double> a, std::span<const double> b);

struct SimilarityScore {
    double bleu = 0.0;
    double chrf = 0.0;
    double cosine = 0.0;
};

struct MetricOptions {
    BleuOptions bleu;
    ChrfOptions chrf;
};

/// Per-pair surface scores, OpenMP-parallel over pairs.
std::vector<double> pair_scores(std::span<const std::string> candidates, std::span<const std::string> references,
                                Metric metric, const MetricOptions& opts = {});

/// Embeds every text; parallel over texts.
std::vector<EmbeddingVector> embed_all(std::span<const std::string> texts, const Embedder& embedder);

/// Per-id scores of `candidate` against `reference`, paired by source id in
/// reference order. Throws DataError listing missing ids.
std::vector<double> paired_scores(const TransformedCorpus& reference, const TransformedCorpus& candidate,
                                  Metric metric, const Embedder* embedder = nullptr,
                                  const MetricOptions& opts = {});

/// Arithmetic mean of paired_scores.
double mean_similarity(const TransformedCorpus& reference, const TransformedCorpus& candidate, Metric metric,
                       const Embedder* embedder = nullptr, const MetricOptions& opts = {});

struct PairwiseMatrix {
    std::vector<TransformationKind> labels;
    /// values[i][j] = mean similarity with corpora[i] as reference and
    /// corpora[j] as candidate.
    std::vector<std::vector<double>> values;
    Metric metric = Metric::Bleu;
};

PairwiseMatrix pairwise_matrix(std::span<const TransformedCorpus> corpora, Metric metric,
                               const Embedder* embedder = nullptr, const MetricOptions& opts = {});

/// Throws DataError when the two corpora do not cover the same ids.
void require_same_ids(const TransformedCorpus& a, const TransformedCorpus& b);

}  // namespace semform
