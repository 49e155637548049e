#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semform/classifier.hpp"
#include "semform/textmetrics.hpp"

/// Single-threaded versions of the parallel kernels. Tests compare them
/// against the OpenMP paths; the benchmark times both.
namespace semform::reference {

std::vector<double> pair_scores_serial(std::span<const std::string> candidates,
                                       std::span<const std::string> references, Metric metric,
                                       const MetricOptions& opts = {});

PairwiseMatrix pairwise_matrix_serial(std::span<const TransformedCorpus> corpora, Metric metric,
                                      const Embedder* embedder = nullptr, const MetricOptions& opts = {});

double wilcoxon_exact_p_serial(std::span<const double> ranks, double w_plus);

std::vector<ClassificationRun> cross_validate_serial(const TransformedCorpus& corpus, const Dataset& d, int k,
                                                     std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                                     const TrainConfig& cfg);

}  // namespace semform::reference
