#include "semform/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <fmt/format.h>

#include "semform/parallel.hpp"
#include "semform/textmetrics.hpp"

namespace semform {

using nlohmann::json;

void TrainConfig::validate() const {
    if (max_epochs < 1) throw DataError(fmt::format("max_epochs must be >= 1, got {}", max_epochs));
    if (early_stop_patience < 1)
        throw DataError(fmt::format("early_stop_patience must be >= 1, got {}", early_stop_patience));
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        throw DataError(fmt::format("learning_rate must be positive, got {}", learning_rate));
    if (!(l2 >= 0) || !std::isfinite(l2)) throw DataError(fmt::format("l2 must be >= 0, got {}", l2));
    if (!(validation_fraction > 0 && validation_fraction < 0.5))
        throw DataError(fmt::format("validation_fraction must be in (0, 0.5), got {}", validation_fraction));
    if (steps_per_epoch < 1) throw DataError(fmt::format("steps_per_epoch must be >= 1, got {}", steps_per_epoch));
}

json TrainConfig::to_json() const {
    return {{"max_epochs", max_epochs},
            {"early_stop_patience", early_stop_patience},
            {"learning_rate", learning_rate},
            {"l2", l2},
            {"validation_fraction", validation_fraction},
            {"seed", seed},
            {"class_weighting", class_weighting},
            {"steps_per_epoch", steps_per_epoch}};
}

std::map<Group, double> class_weights(std::span<const Group> labels) {
    std::size_t ad = 0;
    for (Group g : labels) ad += (g == Group::AD);
    const std::size_t control = labels.size() - ad;
    if (ad == 0 || control == 0)
        throw DataError(fmt::format("class_weights: need both classes (AD {}, C {})", ad, control));
    const double n = static_cast<double>(labels.size());
    return {{Group::AD, n / (2.0 * static_cast<double>(ad))}, {Group::Control, n / (2.0 * static_cast<double>(control))}};
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_shapes(std::span<const EmbeddingVector> x, std::span<const Group> y, std::size_t dim) {
    if (x.size() != y.size())
        throw DataError(fmt::format("{} embeddings for {} labels", x.size(), y.size()));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i].dimension() != dim)
            throw DataError(fmt::format("embedding {} has dimension {}, expected {}", i, x[i].dimension(), dim));
}

bool all_finite(const LossGradient& g) {
    if (!std::isfinite(g.loss) || !std::isfinite(g.grad_bias)) return false;
    return std::all_of(g.grad_weights.begin(), g.grad_weights.end(), [](double v) { return std::isfinite(v); });
}

template <class T>
std::vector<T> pick(std::span<const T> xs, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(xs[i]);
    return out;
}

}  // namespace

LossGradient loss_and_gradient(const LinearHead& head, std::span<const EmbeddingVector> x, std::span<const Group> y,
                               std::span<const double> sample_weights, double l2) {
    check_shapes(x, y, head.dimension());
    if (sample_weights.size() != x.size())
        throw DataError(fmt::format("{} sample weights for {} samples", sample_weights.size(), x.size()));
    if (x.empty()) throw DataError("loss over an empty sample");
    LossGradient g;
    g.grad_weights.assign(head.dimension(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = dot(head.weights, x[i].values) + head.bias;
        const double target = y[i] == Group::AD ? 1.0 : 0.0;
        const double w = sample_weights[i];
        g.loss += w * (softplus(z) - target * z);
        const double r = w * (sigmoid(z) - target);
        for (std::size_t j = 0; j < head.dimension(); ++j) g.grad_weights[j] += r * x[i].values[j];
        g.grad_bias += r;
    }
    const double inv_n = 1.0 / static_cast<double>(x.size());
    g.loss *= inv_n;
    g.grad_bias *= inv_n;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < head.dimension(); ++j) {
        g.grad_weights[j] = g.grad_weights[j] * inv_n + l2 * head.weights[j];
        norm2 += head.weights[j] * head.weights[j];
    }
    g.loss += 0.5 * l2 * norm2;
    return g;
}

TrainReport train_detailed(std::span<const EmbeddingVector> x, std::span<const Group> y, const TrainConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw DataError("train: no training samples");
    const std::size_t dim = x.front().dimension();
    if (dim == 0) throw DataError("train: zero-dimensional embeddings");
    check_shapes(x, y, dim);

    // Stratified, seeded validation holdout; each class keeps at least one
    // training sample and gives one to validation when it has two or more.
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i] == Group::AD ? 0 : 1].push_back(i);
    if (by_class[0].empty() || by_class[1].empty())
        throw DataError(fmt::format("train: need both classes (AD {}, C {})", by_class[0].size(), by_class[1].size()));
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> train_idx, val_idx;
    for (auto& members : by_class) {
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
        const std::size_t count = members.size();
        auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(count) + 0.5));
        if (count >= 2) n_val = std::clamp<std::size_t>(n_val, 1, count - 1);
        else n_val = 0;
        val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    const auto xt = pick(x, train_idx);
    const auto yt = pick(y, train_idx);
    const auto xv = pick(x, val_idx);
    const auto yv = pick(y, val_idx);
    std::map<Group, double> cw{{Group::AD, 1.0}, {Group::Control, 1.0}};
    if (cfg.class_weighting) cw = class_weights(yt);
    auto weights_for = [&](const std::vector<Group>& labels) {
        std::vector<double> w;
        w.reserve(labels.size());
        for (Group g : labels) w.push_back(cw.at(g));
        return w;
    };
    const auto wt = weights_for(yt);
    const auto wv = weights_for(yv);

    TrainReport rep;
    rep.train_size = xt.size();
    rep.validation_size = xv.size();
    LinearHead head{std::vector<double>(dim, 0.0), 0.0};
    LinearHead best = head;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = cfg.learning_rate / std::sqrt(static_cast<double>(epoch));
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto g = loss_and_gradient(head, xt, yt, wt, cfg.l2);
            if (!all_finite(g))
                throw TrainingError(fmt::format("non-finite training loss at epoch {} step {} (loss {}, lr {}, bias {})",
                                                epoch, step + 1, g.loss, lr, head.bias));
            for (std::size_t j = 0; j < dim; ++j) head.weights[j] -= lr * g.grad_weights[j];
            head.bias -= lr * g.grad_bias;
        }
        rep.epochs_run = epoch;
        if (xv.empty()) continue;
        const double vl = loss_and_gradient(head, xv, yv, wv, 0.0).loss;
        if (!std::isfinite(vl))
            throw TrainingError(fmt::format("non-finite validation loss at epoch {} (bias {})", epoch, head.bias));
        rep.validation_losses.push_back(vl);
        if (vl < best_loss) {
            best_loss = vl;
            best = head;
            rep.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    rep.head = xv.empty() ? head : best;
    return rep;
}

LinearHead train(std::span<const EmbeddingVector> x, std::span<const Group> y, const TrainConfig& cfg) {
    return train_detailed(x, y, cfg).head;
}

Predictions predict(const LinearHead& head, std::span<const EmbeddingVector> x) {
    Predictions out;
    out.labels.reserve(x.size());
    out.scores.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].dimension() != head.dimension())
            throw DataError(fmt::format("predict: embedding {} has dimension {}, head expects {}", i,
                                        x[i].dimension(), head.dimension()));
        const double s = sigmoid(dot(head.weights, x[i].values) + head.bias);
        out.scores.push_back(s);
        out.labels.push_back(s >= 0.5 ? Group::AD : Group::Control);
    }
    return out;
}

namespace {

struct Confusion {
    std::size_t tp_ad = 0, fp_ad = 0, fn_ad = 0, tp_c = 0, fp_c = 0, fn_c = 0;
};

Confusion confusion(std::span<const Group> pred, std::span<const Group> gold) {
    if (pred.size() != gold.size())
        throw DataError(fmt::format("{} predictions for {} gold labels", pred.size(), gold.size()));
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == Group::AD;
        const bool g = gold[i] == Group::AD;
        if (p && g) {
            ++c.tp_ad;
        } else if (p) {
            ++c.fp_ad;
            ++c.fn_c;
        } else if (g) {
            ++c.fn_ad;
            ++c.fp_c;
        } else {
            ++c.tp_c;
        }
    }
    return c;
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

}  // namespace

double macro_f1(std::span<const Group> pred, std::span<const Group> gold) {
    const Confusion c = confusion(pred, gold);
    if (c.tp_ad + c.fn_ad == 0 || c.tp_c + c.fn_c == 0) throw DataError("macro_f1: gold labels need both classes");
    return 0.5 * (f1(c.tp_ad, c.fp_ad, c.fn_ad) + f1(c.tp_c, c.fp_c, c.fn_c));
}

ClassAccuracy per_class_accuracy(std::span<const Group> pred, std::span<const Group> gold) {
    const Confusion c = confusion(pred, gold);
    if (c.tp_ad + c.fn_ad == 0 || c.tp_c + c.fn_c == 0)
        throw DataError("per_class_accuracy: gold labels need both classes");
    return {static_cast<double>(c.tp_ad) / static_cast<double>(c.tp_ad + c.fn_ad),
            static_cast<double>(c.tp_c) / static_cast<double>(c.tp_c + c.fn_c)};
}

json ClassificationRun::to_json() const {
    json fj = json::array();
    for (const auto& f : folds)
        fj.push_back({{"fold", f.fold},
                      {"macro_f1", f.macro_f1},
                      {"acc_ad", f.acc_ad},
                      {"acc_c", f.acc_c},
                      {"single_class", f.single_class},
                      {"test_size", f.test_size}});
    json j = {{"seed", seed}, {"folds", fj},         {"macro_f1", macro_f1},
              {"acc_ad", acc_ad}, {"acc_c", acc_c}, {"degenerate", degenerate}};
    if (assignment) j["assignment"] = {{"k", assignment->k}, {"fold_of", assignment->fold_of}};
    return j;
}

ClassificationRun ClassificationRun::from_json(const json& j) {
    try {
        ClassificationRun r;
        r.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& f : j.at("folds"))
            r.folds.push_back({f.at("fold").get<int>(), f.at("macro_f1").get<double>(), f.at("acc_ad").get<double>(),
                               f.at("acc_c").get<double>(), f.at("single_class").get<bool>(),
                               f.at("test_size").get<std::size_t>()});
        r.macro_f1 = j.at("macro_f1").get<double>();
        r.acc_ad = j.at("acc_ad").get<double>();
        r.acc_c = j.at("acc_c").get<double>();
        r.degenerate = j.at("degenerate").get<bool>();
        if (j.contains("assignment"))
            r.assignment = FoldAssignment{j["assignment"].at("k").get<int>(),
                                          j["assignment"].at("fold_of").get<std::map<std::string, int>>()};
        return r;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("malformed classification run: {}", e.what()));
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<std::uint64_t> run_seeds(std::uint64_t master, std::size_t count) {
    std::vector<std::uint64_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = splitmix64(master + i);
    return out;
}

Dataset labelled_subset(const TransformedCorpus& corpus, const Dataset& d) {
    std::set<std::string_view> wanted;
    for (const auto& item : corpus.items) {
        if (!d.find(item.source_id))
            throw DataError(fmt::format("corpus {} has id \"{}\" not in dataset \"{}\"", to_string(corpus.kind),
                                        item.source_id, d.name));
        wanted.insert(item.source_id);
    }
    Dataset out{d.name, {}, d.source_language};
    for (const auto& t : d.transcripts)
        if (wanted.contains(t.id)) out.transcripts.push_back(t);
    return out;
}

namespace {

struct Sample {
    std::vector<EmbeddingVector> x;
    std::vector<Group> y;
    std::vector<std::string> ids;
};

Sample embed_subset(const TransformedCorpus& corpus, const Dataset& sub, const Embedder& embedder, bool parallel) {
    Sample s;
    std::vector<std::string> texts;
    for (const auto& t : sub.transcripts) {
        s.ids.push_back(t.id);
        s.y.push_back(t.group);
        texts.push_back(corpus.find(t.id)->text);
    }
    if (parallel) {
        s.x = embed_all(texts, embedder);
    } else {
        for (const auto& t : texts) s.x.push_back(embedder.embed(t));
    }
    return s;
}

FoldMetrics evaluate(const LinearHead& head, const std::vector<EmbeddingVector>& x, const std::vector<Group>& y,
                     int fold) {
    const auto p = predict(head, x);
    const auto acc = per_class_accuracy(p.labels, y);
    FoldMetrics m;
    m.fold = fold;
    m.macro_f1 = macro_f1(p.labels, y);
    m.acc_ad = acc.ad;
    m.acc_c = acc.control;
    m.single_class = std::all_of(p.labels.begin(), p.labels.end(), [&](Group g) { return g == p.labels.front(); });
    m.test_size = y.size();
    return m;
}

// Adds seed/fold context while keeping the error category.
[[noreturn]] void rethrow_with_context(std::uint64_t seed, int fold) {
    try {
        throw;
    } catch (const TrainingError& e) {
        throw TrainingError(fmt::format("seed {}, fold {}: {}", seed, fold, e.what()));
    } catch (const DomainError& e) {
        throw DomainError(fmt::format("seed {}, fold {}: {}", seed, fold, e.what()));
    } catch (const DataError& e) {
        throw DataError(fmt::format("seed {}, fold {}: {}", seed, fold, e.what()));
    }
}

ClassificationRun aggregate(std::uint64_t seed, std::vector<FoldMetrics> folds) {
    ClassificationRun r;
    r.seed = seed;
    for (const auto& f : folds) {
        r.macro_f1 += f.macro_f1;
        r.acc_ad += f.acc_ad;
        r.acc_c += f.acc_c;
        r.degenerate = r.degenerate || f.single_class;
    }
    const double n = static_cast<double>(folds.size());
    r.macro_f1 /= n;
    r.acc_ad /= n;
    r.acc_c /= n;
    r.folds = std::move(folds);
    return r;
}

std::uint64_t cell_seed(std::uint64_t seed, int fold) {
    return splitmix64(seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(fold + 1)));
}

}  // namespace

namespace detail {

std::vector<ClassificationRun> cross_validate_impl(const TransformedCorpus& corpus, const Dataset& d, int k,
                                                   std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                                   const TrainConfig& cfg, bool parallel) {
    cfg.validate();
    if (seeds.empty()) throw DataError("cross_validate: no seeds");
    const Dataset sub = labelled_subset(corpus, d);
    std::vector<FoldAssignment> assignments;
    for (auto seed : seeds) assignments.push_back(split_folds(sub, k, seed));
    const Sample s = embed_subset(corpus, sub, embedder, parallel);

    const auto kk = static_cast<std::size_t>(k);
    std::vector<FoldMetrics> cells(seeds.size() * kk);
    auto run_cell = [&](std::size_t cell) {
        const std::size_t si = cell / kk;
        const int fold = static_cast<int>(cell % kk);
        try {
            Sample tr, te;
            for (std::size_t i = 0; i < s.ids.size(); ++i) {
                Sample& dst = assignments[si].fold_of.at(s.ids[i]) == fold ? te : tr;
                dst.x.push_back(s.x[i]);
                dst.y.push_back(s.y[i]);
            }
            TrainConfig c = cfg;
            c.seed = cell_seed(seeds[si], fold);
            cells[cell] = evaluate(train(tr.x, tr.y, c), te.x, te.y, fold);
        } catch (...) {
            rethrow_with_context(seeds[si], fold);
        }
    };
    if (parallel) {
        parallel_for(cells.size(), run_cell);
    } else {
        for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
    }

    std::vector<ClassificationRun> runs;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        std::vector<FoldMetrics> folds(cells.begin() + static_cast<std::ptrdiff_t>(si * kk),
                                       cells.begin() + static_cast<std::ptrdiff_t>((si + 1) * kk));
        auto run = aggregate(seeds[si], std::move(folds));
        run.assignment = assignments[si];
        runs.push_back(std::move(run));
    }
    return runs;
}

}  // namespace detail

std::vector<ClassificationRun> cross_validate(const TransformedCorpus& corpus, const Dataset& d, int k,
                                              std::span<const std::uint64_t> seeds, const Embedder& embedder,
                                              const TrainConfig& cfg) {
    return detail::cross_validate_impl(corpus, d, k, seeds, embedder, cfg, true);
}

std::vector<ClassificationRun> fixed_split_evaluate(const TransformedCorpus& corpus, const Dataset& d,
                                                    const Embedder& embedder, const TrainConfig& cfg,
                                                    std::span<const std::uint64_t> seeds) {
    cfg.validate();
    if (seeds.empty()) throw DataError("fixed_split_evaluate: no seeds");
    const Dataset sub = labelled_subset(corpus, d);
    const auto [train_set, test_set] = fixed_split(sub);
    if (test_set.empty()) throw DataError(fmt::format("dataset \"{}\" has no Test items", d.name));
    if (train_set.empty()) throw DataError(fmt::format("dataset \"{}\" has no Train items", d.name));
    const Sample tr = embed_subset(corpus, train_set, embedder, true);
    const Sample te = embed_subset(corpus, test_set, embedder, true);

    std::vector<ClassificationRun> runs(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t si) {
        try {
            TrainConfig c = cfg;
            c.seed = seeds[si];
            runs[si] = aggregate(seeds[si], {evaluate(train(tr.x, tr.y, c), te.x, te.y, 0)});
        } catch (...) {
            rethrow_with_context(seeds[si], 0);
        }
    });
    return runs;
}

}  // namespace semform
