#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "semform/corpus.hpp"
#include "semform/embedding.hpp"
#include "semform/error.hpp"
#include "semform/transformed_corpus.hpp"

namespace semform {

/// Non-finite loss or gradient during training.
class TrainingError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Logistic-regression head over fixed embeddings. AD is the positive class.
struct LinearHead {
    std::vector<double> weights;
    double bias = 0.0;

    std::size_t dimension() const { return weights.size(); }
    friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct TrainConfig {
    int max_epochs = 10;
    int early_stop_patience = 3;
    /// Step size at epoch e is learning_rate / sqrt(e).
    double learning_rate = 0.1;
    double l2 = 1e-4;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    bool class_weighting = true;
    /// Full-batch gradient steps per epoch; validation loss is checked once
    /// per epoch.
    int steps_per_epoch = 20;

    /// Throws DataError on out-of-range settings.
    void validate() const;
    nlohmann::json to_json() const;
};

/// Balanced weights n / (n_classes * count(c)). Throws DataError when only
/// one class is present.
std::map<Group, double> class_weights(std::span<const Group> labels);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

/// (1/n) sum_i w_i * BCE_i + (l2/2) |weights|^2. The bias is not penalized.
LossGradient loss_and_gradient(const LinearHead& head, std::span<const EmbeddingVector> x,
                               std::span<const Group> y, std::span<const double> sample_weights, double l2);

struct TrainReport {
    LinearHead head;
    int epochs_run = 0;
    /// 1-based epoch whose head was kept; 0 when no validation set existed
    /// and the last head was kept.
    int best_epoch = 0;
    std::vector<double> validation_losses;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
};

TrainReport train_detailed(std::span<const EmbeddingVector> x, std::span<const Group> y, const TrainConfig& cfg);
LinearHead train(std::span<const EmbeddingVector> x, std::span<const Group> y, const TrainConfig& cfg);

double sigmoid(double z);

struct Predictions {
    std::vector<Group> labels;
    std::vector<double> scores;
};

/// score = sigmoid(w.x + b); label AD when score >= 0.5 (ties go to AD).
Predictions predict(const LinearHead& head, std::span<const EmbeddingVector> x);

/// Unweighted mean of per-class F1; a class's F1 is 0 when its precision
/// and recall are both 0. Gold must contain both classes.
double macro_f1(std::span<const Group> pred, std::span<const Group> gold);

struct ClassAccuracy {
    double ad = 0.0;
    double control = 0.0;
};

/// Per-class recall. Throws DataError if gold lacks a class.
ClassAccuracy per_class_accuracy(std::span<const Group> pred, std::span<const Group> gold);

struct FoldMetrics {
    int fold = 0;
    double macro_f1 = 0.0;
    double acc_ad = 0.0;
    double acc_c = 0.0;
    /// Every prediction in the held-out fold had the same label.
    bool single_class = false;
    std::size_t test_size = 0;
};

struct ClassificationRun {
    std::uint64_t seed = 0;
    std::vector<FoldMetrics> folds;
    double macro_f1 = 0.0;
    double acc_ad = 0.0;
    double acc_c = 0.0;
    /// Set when any fold collapsed to a single predicted class.
    bool degenerate = false;
    /// Present for cross-validation runs.
    std::optional<FoldAssignment> assignment;

    nlohmann::json to_json() const;
    static ClassificationRun from_json(const nlohmann::json& j);
};

/// Ten-by-default run seeds: splitmix64(master + i).
std::vector<std::uint64_t> run_seeds(std::uint64_t master, std::size_t count = 10);
std::uint64_t splitmix64(std::uint64_t x);

/// Dataset restricted to the corpus ids, in dataset order. Throws DataError
/// when the corpus names an id the dataset lacks.
Dataset labelled_subset(const TransformedCorpus& corpus, const Dataset& d);

/// Stratified k-fold per seed; folds come from split_folds over the ids the
/// corpus covers, so corpora of one dataset with the same ids share folds.
/// (seed, fold) cells train in parallel; results are ordered by (seed, fold).
std::vector<ClassificationRun> cross_validate(const TransformedCorpus& corpus, const Dataset& d, int k,
                                              std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                              const TrainConfig& cfg);

/// Train on the Train split, evaluate on Test, once per seed.
std::vector<ClassificationRun> fixed_split_evaluate(const TransformedCorpus& corpus, const Dataset& d,
                                                    const Embedder& embedder, const TrainConfig& cfg,
                                                    std::span<const std::uint64_t> seeds);

namespace detail {
std::vector<ClassificationRun> cross_validate_impl(const TransformedCorpus& corpus, const Dataset& d, int k,
                                                   std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                                   const TrainConfig& cfg, bool parallel);
}  // namespace detail

}  // namespace semform
