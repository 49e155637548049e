// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

#include <fmt/format.h>

#include "oracles.hpp"
#include "semform/cli.hpp"
#include "semform/stattests.hpp"
#include "semform/textmetrics.hpp"

using namespace semform;
using namespace semform::testing;
namespace fs = std::filesystem;

namespace {

/// Collects failed checks for one criterion.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        failed_ = failed_ || !ok;
    }
    void near(double got, double want, double tol, const std::string& what) {
        expect(std::abs(got - want) <= tol, fmt::format("{}: got {:.12g}, want {:.12g} ± {:g}", what, got, want, tol));
    }
    bool failed() const { return failed_; }
    std::string summary() const {
        std::string s;
        for (const auto& f : failures_) s += (s.empty() ? "" : "; ") + f;
        return s;
    }

private:
    bool failed_ = false;
    std::vector<std::string> failures_;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<void(Checks&)> run;
};

void pearson_check(Checks& c) {
    // Mean cosine similarity and mean macro-F1 per transformation.
    const std::vector<double> cos_dog{0.69, 0.74, 0.76, 0.68, 0.39}, f1_dog{0.499, 0.547, 0.647, 0.662, 0.523};
    const std::vector<double> cos_adr{0.60, 0.59, 0.67, 0.66, 0.45}, f1_adr{0.695, 0.668, 0.702, 0.694, 0.527};
    const auto dog = pearson(cos_dog, f1_dog);
    c.near(dog.statistic, 0.415, 0.005, "Dog Story r");
    c.near(dog.p_value, 0.488, 0.01, "Dog Story p");
    c.expect(dog.df && *dog.df == 3.0, "Dog Story df = 3");
    const auto adr = pearson(cos_adr, f1_adr);
    c.near(adr.statistic, 0.953, 0.005, "ADReSS r");
    c.near(adr.p_value, 0.012, 0.005, "ADReSS p");
}

void text_metric_check(Checks& c) {
    for (const auto& [cand, ref] : fuzz_pairs(100, 2024)) {
        c.near(bleu(cand, ref), oracle_bleu(cand, ref), 1e-9, "bleu(" + cand + " | " + ref + ")");
        c.near(chrf(cand, ref), oracle_chrf(cand, ref), 1e-9, "chrf(" + cand + " | " + ref + ")");
    }
    c.expect(bleu("quick", "quickly") == 0.0, "bleu(quick, quickly) == 0");
    c.expect(chrf("quick", "quickly") > 0.0, "chrf(quick, quickly) > 0");
}

void wilcoxon_check(Checks& c) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> nsize(1, 12);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = nsize(rng);
        std::vector<double> a(n), b(n), d(n);
        for (int i = 0; i < n; ++i) {
            a[i] = std::round(nd(rng) * 100.0);
            d[i] = (nd(rng) > 0.0 ? 1.0 : -1.0) * (i + 1);
            b[i] = a[i] + d[i];
        }
        const auto r = wilcoxon_signed_rank(b, a, WilcoxonMode::Exact);
        c.near(r.p_value, wilcoxon_enumerated_p(d), 1e-12, fmt::format("case {} (n = {})", rep, n));
    }
    const std::vector<double> zero(5, 0.0), up{1, 2, 3, 4, 5};
    c.near(wilcoxon_signed_rank(up, zero).p_value, 0.0625, 1e-15, "all-positive n = 5");
}

void welch_check(Checks& c) {
    for (const auto& o : oracles().at("welch")) {
        const auto r = welch_t(vec(o.at("a")), vec(o.at("b")));
        c.near(r.statistic, o.at("t").get<double>(), 1e-6, "welch t");
        c.near(*r.df, o.at("df").get<double>(), 1e-6, "welch df");
        c.near(r.p_value, o.at("p").get<double>(), 1e-6, "welch p");
    }
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> x(8), y(8);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = nd(rng);
            y[i] = x[i] + 0.75;
        }
        std::shuffle(y.begin(), y.end(), rng);
        const auto w = welch_t(x, y), s = student_t(x, y);
        c.near(w.statistic, s.statistic, 1e-9, "welch t vs student t");
        c.near(*w.df, *s.df, 1e-9, "welch df vs student df");
        c.near(w.p_value, s.p_value, 1e-9, "welch p vs student p");
    }
}

void class_weight_check(Checks& c) {
    std::vector<Group> y(23, Group::AD);
    y.insert(y.end(), 116, Group::Control);
    const auto w = class_weights(y);
    c.near(w.at(Group::AD), 3.0217, 1e-3, "w(AD)");
    c.near(w.at(Group::Control), 0.5991, 1e-3, "w(C)");
    double total = 0;
    for (Group g : y) total += w.at(g);
    c.near(total, 139.0, 1e-12, "sum of weights");
    std::vector<Group> b(78, Group::AD);
    b.insert(b.end(), 78, Group::Control);
    const auto wb = class_weights(b);
    c.expect(wb.at(Group::AD) == 1.0 && wb.at(Group::Control) == 1.0, "balanced weights are 1");
}

void classifier_check(Checks& c) {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> uw(0.2, 3.0);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t dim = 3 + inst % 6, n = 5 + inst;
        LinearHead h;
        for (std::size_t j = 0; j < dim; ++j) h.weights.push_back(nd(rng));
        h.bias = nd(rng);
        std::vector<EmbeddingVector> x(n);
        std::vector<Group> y(n);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) x[i].values.push_back(nd(rng));
            y[i] = i % 3 == 0 ? Group::AD : Group::Control;
            w[i] = uw(rng);
        }
        const double l2 = 0.01 * (inst % 4), step = 1e-5;
        const auto g = loss_and_gradient(h, x, y, w, l2);
        auto fd = [&](auto bump) {
            auto hp = h, hm = h;
            bump(hp, step);
            bump(hm, -step);
            return (loss_and_gradient(hp, x, y, w, l2).loss - loss_and_gradient(hm, x, y, w, l2).loss) / (2 * step);
        };
        for (std::size_t j = 0; j < dim; ++j) {
            const double num = fd([j](LinearHead& m, double s) { m.weights[j] += s; });
            c.expect(rel(g.grad_weights[j], num) < 1e-4, fmt::format("gradient instance {} weight {}", inst, j));
        }
        const double num = fd([](LinearHead& m, double s) { m.bias += s; });
        c.expect(rel(g.grad_bias, num) < 1e-4, fmt::format("gradient instance {} bias", inst));
    }

    const auto toy = separable(30, 4);
    const CoordinateEmbedder e;
    std::vector<EmbeddingVector> x;
    for (const auto& t : toy.dataset.transcripts) x.push_back(e.embed(t.text));
    const auto y = toy.dataset.labels();
    TrainConfig cfg;
    cfg.max_epochs = 200;
    c.expect(macro_f1(predict(train(x, y, cfg), x).labels, y) == 1.0, "separable toy macro-F1 = 1");

    const auto blobs = load_blobs();
    TrainConfig weighted;
    weighted.seed = 15;
    TrainConfig plain = weighted;
    plain.class_weighting = false;
    const double rw = recall_ad(train(blobs.x, blobs.y, weighted), blobs);
    const double rp = recall_ad(train(blobs.x, blobs.y, plain), blobs);
    c.expect(rw > rp, fmt::format("minority recall weighted {} > unweighted {}", rw, rp));
}

std::vector<std::string> jsonl_ids(const fs::path& p) {
    std::vector<std::string> ids;
    std::istringstream in(slurp(p));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ids.push_back(json::parse(line).at("id").get<std::string>());
    return ids;
}

std::map<std::string, std::string> files_under(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

/// Shared between the protocol and golden-file criteria.
struct FixtureRuns {
    std::unique_ptr<TempDir> first, second;
    std::string error;
};

FixtureRuns& fixture_runs() {
    static FixtureRuns runs = [] {
        FixtureRuns r;
        r.first = std::make_unique<TempDir>("accept_a");
        r.second = std::make_unique<TempDir>("accept_b");
        for (const TempDir* dir : {r.first.get(), r.second.get()}) {
            CommandContext ctx;
            ctx.run_dir = dir->path();
            ctx.offline = true;
            ctx.config.set("dataset", fixture("bilingual40.jsonl").string());
            std::ostringstream err;
            if (run_command("run", ctx, err) != kExitOk) r.error += err.str();
        }
        return r;
    }();
    return runs;
}

void protocol_check(Checks& c) {
    const auto& runs = fixture_runs();
    c.expect(runs.error.empty(), "run failed: " + runs.error);
    if (!runs.error.empty()) return;
    const fs::path dir = runs.first->path();

    // (a) every kind present with the dataset ids in order.
    const auto ids = jsonl_ids(dir / "dataset.jsonl");
    c.expect(ids.size() == 40, "40 transcripts ingested");
    for (auto kind : kAllKinds) {
        const fs::path p = dir / "corpora" / fmt::format("{}.jsonl", to_string(kind));
        c.expect(fs::exists(p), fmt::format("{} corpus written", to_string(kind)));
        if (fs::exists(p)) c.expect(jsonl_ids(p) == ids, fmt::format("{} keeps the source ids", to_string(kind)));
    }

    // (b) prompts sent to providers, read back from the cached requests.
    const std::set<std::string> chat_prompts{kShort, kMedium, kLong, kStory};
    std::set<std::string> seen_chat, seen_caption;
    for (const auto& [name, body] : files_under(dir / "cache")) {
        if (!name.ends_with(".json")) continue;
        const auto req = json::parse(body).at("request");
        if (req.at("op") == "chat") seen_chat.insert(req.at("input").at("system").get<std::string>());
        if (req.at("op") == "image_to_text") seen_caption.insert(req.at("input").at("prompt").get<std::string>());
    }
    c.expect(seen_chat == chat_prompts, "chat system prompts are exactly the four expected literals");
    c.expect(seen_caption == std::set<std::string>{kCaption}, "caption prompt is the expected literal");

    // (c) every kind uses the same folds for a given seed.
    const auto cls = json::parse(slurp(dir / "classification.json"));
    const auto& kinds = cls.at("kinds");
    c.expect(kinds.size() == 8, "classification covers all kinds");
    const auto& ref = kinds.at("Original");
    for (const auto& [name, kind_runs] : kinds.items()) {
        c.expect(kind_runs.size() == ref.size(), name + ": run count");
        for (std::size_t s = 0; s < std::min(kind_runs.size(), ref.size()); ++s) {
            c.expect(kind_runs[s].at("seed") == ref[s].at("seed"), fmt::format("{} run {}: seed", name, s));
            c.expect(kind_runs[s].at("assignment") == ref[s].at("assignment"),
                     fmt::format("{} run {}: fold assignment", name, s));
        }
    }

    // (d) identical reports from two independent runs.
    const auto a = files_under(dir / "reports"), b = files_under(runs.second->path() / "reports");
    c.expect(a.size() == 24, fmt::format("24 report files, got {}", a.size()));
    c.expect(a == b, "reports are byte-identical across runs");
}

void golden_check(Checks& c) {
    const auto& runs = fixture_runs();
    c.expect(runs.error.empty(), "run failed: " + runs.error);
    if (!runs.error.empty()) return;
    const fs::path reports = runs.first->path() / "reports";
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(golden(""))) {
        const std::string name = e.path().filename().string();
        c.expect(fs::exists(reports / name), name + " produced");
        c.expect(slurp(reports / name) == slurp(e.path()), name + " matches the golden copy");
        ++compared;
    }
    c.expect(compared >= 2, "golden files present");
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "Pearson correlation of similarity and macro-F1", 1.0, pearson_check},
        {2, "BLEU and chrF match brute-force oracles", 5.0, text_metric_check},
        {3, "Wilcoxon exact p matches enumeration", 10.0, wilcoxon_check},
        {4, "Welch t matches reference fixture and Student reduction", 5.0, welch_check},
        {5, "Class-weight identity", 1.0, class_weight_check},
        {6, "Classifier gradient, separability and weighting", 30.0, classifier_check},
        {7, "Mock pipeline protocol fidelity", 120.0, protocol_check},
        {8, "Golden-file stability of the fixture run", 120.0, golden_check},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Checks checks;
        const auto start = std::chrono::steady_clock::now();
        try {
            cr.run(checks);
        } catch (const std::exception& e) {
            checks.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        checks.expect(secs < cr.budget_s, fmt::format("runtime {:.2f} s over budget {:.0f} s", secs, cr.budget_s));
        const bool ok = !checks.failed();
        failed += !ok;
        std::cout << fmt::format("{} {} {} ({:.3f} s)", ok ? "PASS" : "FAIL", cr.id, cr.name, secs);
        if (!ok) std::cout << ": " << checks.summary();
        std::cout << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
