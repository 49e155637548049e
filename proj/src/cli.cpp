#include "semform/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "semform/digest.hpp"
#include "semform/error.hpp"
#include "semform/lexstats.hpp"
#include "semform/stattests.hpp"

#ifndef SEMFORM_DATA_DIR
#define SEMFORM_DATA_DIR "data"
#endif

namespace semform {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- configuration ---------------------------------------------------------

namespace {

constexpr std::array<ProviderKind, 5> kRoles = {ProviderKind::Chat, ProviderKind::Translate, ProviderKind::Embed,
                                                ProviderKind::TextToImage, ProviderKind::ImageToText};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find(',', start);
        if (end == std::string_view::npos) end = s.size();
        auto item = trim(s.substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        start = end + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    if constexpr (std::is_floating_point_v<T>) {
        // from_chars for double is missing in older libstdc++.
        try {
            std::size_t used = 0;
            out = static_cast<T>(std::stod(value, &used));
            if (used == value.size()) return out;
        } catch (const std::exception&) {
        }
    } else {
        auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec == std::errc() && ptr == last) return out;
    }
    throw UsageError(fmt::format("config key {}: \"{}\" is not a valid number", key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw UsageError(fmt::format("config key {}: \"{}\" is not a boolean", key, value));
}

std::string unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char n = s[++i];
            out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string_view format_name(ImageMode m) { return m == ImageMode::PerScene ? "per_scene" : "per_storyboard"; }

}  // namespace

RunConfig::RunConfig() {
    for (auto role : kRoles) {
        ProviderConfig p;
        p.kind = role;
        providers[role] = p;
    }
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v = {
            "dataset", "dataset_format", "kinds", "k", "seeds", "master_seed", "cache", "mode",
            "lenient_threshold", "target_language", "image_mode", "max_in_flight", "bleu.max_n",
            "chrf.max_n", "chrf.beta", "frequency_table", "frequency_language", "pos_lexicon",
            "pos_annotations", "oov_zipf", "formats", "retry.attempts", "retry.backoff_ms",
            "train.max_epochs", "train.patience", "train.learning_rate", "train.l2",
            "train.validation_fraction", "train.class_weighting", "train.steps_per_epoch"};
        for (auto role : kRoles)
            for (const char* f : {"endpoint", "model", "temperature", "max_tokens", "seed", "credential_env",
                                  "max_in_flight", "timeout_s", "dimension"})
                v.push_back(fmt::format("{}.{}", to_string(role), f));
        for (auto kind : {TransformationKind::ShortSummary, TransformationKind::MediumSummary,
                          TransformationKind::LongSummary, TransformationKind::Storyboard,
                          TransformationKind::ImageDescription})
            v.push_back(fmt::format("prompt.{}", to_string(kind)));
        return v;
    }();
    return k;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    auto positive = [&](auto v) {
        if (v < 1) throw UsageError(fmt::format("config key {}: must be >= 1", key));
        return v;
    };
    if (key == "dataset") {
        dataset = value;
    } else if (key == "dataset_format") {
        dataset_format = parse_format(value);
        if (!dataset_format) throw UsageError(fmt::format("config key {}: unknown format \"{}\"", key, value));
    } else if (key == "kinds") {
        kinds.clear();
        for (const auto& name : split_list(value)) {
            auto k = parse_kind(name);
            if (!k) throw UsageError(fmt::format("config key {}: unknown transformation \"{}\"", key, name));
            kinds.insert(*k);
        }
        kinds.insert(TransformationKind::Original);
    } else if (key == "k") {
        k = parse_number<int>(key, value);
        if (k < 2) throw UsageError(fmt::format("config key k: must be >= 2, got {}", k));
    } else if (key == "seeds") {
        seeds = positive(parse_number<std::size_t>(key, value));
    } else if (key == "master_seed") {
        master_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "cache") {
        cache = value;
    } else if (key == "mode") {
        if (value == "strict") failure_mode = FailureMode::Strict;
        else if (value == "lenient") failure_mode = FailureMode::Lenient;
        else throw UsageError(fmt::format("config key mode: expected strict or lenient, got \"{}\"", value));
    } else if (key == "lenient_threshold") {
        lenient_threshold = parse_number<double>(key, value);
        if (!(lenient_threshold >= 0 && lenient_threshold <= 1))
            throw UsageError("config key lenient_threshold: must be in [0, 1]");
    } else if (key == "target_language") {
        if (!is_language_tag(value)) throw UsageError(fmt::format("config key {}: bad language tag \"{}\"", key, value));
        target_language = value;
    } else if (key == "image_mode") {
        if (value == "per_scene") image_mode = ImageMode::PerScene;
        else if (value == "per_storyboard") image_mode = ImageMode::PerStoryboard;
        else throw UsageError(fmt::format("config key image_mode: expected per_storyboard or per_scene, got \"{}\"", value));
    } else if (key == "max_in_flight") {
        max_in_flight = positive(parse_number<int>(key, value));
    } else if (key == "bleu.max_n") {
        metrics.bleu.max_n = positive(parse_number<int>(key, value));
    } else if (key == "chrf.max_n") {
        metrics.chrf.max_n = positive(parse_number<int>(key, value));
    } else if (key == "chrf.beta") {
        metrics.chrf.beta = parse_number<double>(key, value);
        if (!(metrics.chrf.beta > 0)) throw UsageError("config key chrf.beta: must be > 0");
    } else if (key == "frequency_table") {
        frequency_table = value;
    } else if (key == "frequency_language") {
        frequency_language = value;
    } else if (key == "pos_lexicon") {
        pos_lexicon = value;
    } else if (key == "pos_annotations") {
        pos_annotations = value;
    } else if (key == "oov_zipf") {
        oov_zipf = parse_number<double>(key, value);
    } else if (key == "formats") {
        formats.clear();
        for (const auto& f : split_list(value)) {
            auto rf = parse_report_format(f);
            if (!rf) throw UsageError(fmt::format("config key formats: unknown format \"{}\"", f));
            formats.push_back(*rf);
        }
        if (formats.empty()) throw UsageError("config key formats: no formats given");
    } else if (key == "retry.attempts") {
        retry_attempts = positive(parse_number<int>(key, value));
    } else if (key == "retry.backoff_ms") {
        retry_backoff_ms = parse_number<int>(key, value);
    } else if (key == "train.max_epochs") {
        train.max_epochs = positive(parse_number<int>(key, value));
    } else if (key == "train.patience") {
        train.early_stop_patience = positive(parse_number<int>(key, value));
    } else if (key == "train.learning_rate") {
        train.learning_rate = parse_number<double>(key, value);
    } else if (key == "train.l2") {
        train.l2 = parse_number<double>(key, value);
    } else if (key == "train.validation_fraction") {
        train.validation_fraction = parse_number<double>(key, value);
    } else if (key == "train.class_weighting") {
        train.class_weighting = parse_bool(key, value);
    } else if (key == "train.steps_per_epoch") {
        train.steps_per_epoch = positive(parse_number<int>(key, value));
    } else if (key.starts_with("prompt.")) {
        auto kind = parse_kind(key.substr(7));
        if (!kind) throw UsageError(fmt::format("config key {}: unknown transformation", key));
        if (value.empty()) throw UsageError(fmt::format("config key {}: empty prompt", key));
        if (!PromptSet::defaults().prompts().contains(*kind))
            throw UsageError(fmt::format("config key {}: {} does not use a prompt", key, to_string(*kind)));
        prompt_overrides[*kind] = unescape(value);
    } else {
        const auto dot = key.find('.');
        const auto role = dot == std::string::npos ? std::nullopt : parse_provider_kind(key.substr(0, dot));
        if (!role) throw UsageError(fmt::format("unknown config key \"{}\"", key));
        ProviderConfig& p = providers[*role];
        const std::string field = key.substr(dot + 1);
        if (field == "endpoint") p.endpoint = value;
        else if (field == "model") p.model = value;
        else if (field == "temperature") p.temperature = parse_number<double>(key, value);
        else if (field == "max_tokens") p.max_tokens = positive(parse_number<int>(key, value));
        else if (field == "seed") p.seed = value == "none" ? std::nullopt : std::optional(parse_number<std::int64_t>(key, value));
        else if (field == "credential_env") p.credential_env = value;
        else if (field == "max_in_flight") p.max_in_flight = positive(parse_number<int>(key, value));
        else if (field == "timeout_s") p.timeout = std::chrono::seconds(positive(parse_number<int>(key, value)));
        else if (field == "dimension") p.dimension = positive(parse_number<std::size_t>(key, value));
        else throw UsageError(fmt::format("unknown config key \"{}\"", key));
        try {
            p.validate();
        } catch (const DataError& e) {
            throw UsageError(fmt::format("config key {}: {}", key, e.what()));
        }
    }
}

RunConfig RunConfig::parse(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw UsageError(fmt::format("config line {}: expected key = value", row));
        const std::string key = trim(std::string_view(t).substr(0, eq));
        try {
            cfg.set(key, t.substr(eq + 1));
        } catch (const UsageError& e) {
            throw UsageError(fmt::format("config line {}: {}", row, e.what()));
        }
    }
    return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError(fmt::format("cannot open config file {}", path.string()));
    return parse(in);
}

json RunConfig::to_json() const {
    json provs = json::object();
    for (const auto& [role, p] : providers)
        provs[std::string(to_string(role))] = {{"endpoint", p.endpoint},
                                               {"model", p.model},
                                               {"temperature", p.temperature},
                                               {"max_tokens", p.max_tokens},
                                               {"seed", p.seed ? json(*p.seed) : json(nullptr)},
                                               {"credential_env", p.credential_env},
                                               {"max_in_flight", p.max_in_flight},
                                               {"timeout_s", p.timeout.count()},
                                               {"dimension", p.dimension}};
    json kinds_json = json::array();
    for (auto k : kinds) kinds_json.push_back(to_string(k));
    json prompts = json::object();
    for (const auto& [k, v] : prompt_overrides) prompts[std::string(to_string(k))] = v;
    json fmts = json::array();
    for (auto f : formats) fmts.push_back(extension(f));
    return {{"dataset", dataset},
            {"dataset_format", dataset_format ? json(dataset_format == DatasetFormat::Csv ? "csv" : "jsonl") : json(nullptr)},
            {"kinds", kinds_json},
            {"providers", provs},
            {"prompt_overrides", prompts},
            {"k", k},
            {"seeds", seeds},
            {"master_seed", master_seed},
            {"train", train.to_json()},
            {"cache", cache},
            {"mode", failure_mode == FailureMode::Strict ? "strict" : "lenient"},
            {"lenient_threshold", lenient_threshold},
            {"target_language", target_language},
            {"image_mode", format_name(image_mode)},
            {"max_in_flight", max_in_flight},
            {"bleu_max_n", metrics.bleu.max_n},
            {"chrf_max_n", metrics.chrf.max_n},
            {"chrf_beta", metrics.chrf.beta},
            {"frequency_table", frequency_table},
            {"frequency_language", frequency_language},
            {"pos_lexicon", pos_lexicon},
            {"pos_annotations", pos_annotations},
            {"oov_zipf", oov_zipf},
            {"formats", fmts},
            {"retry_attempts", retry_attempts},
            {"retry_backoff_ms", retry_backoff_ms}};
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

std::vector<std::uint64_t> RunConfig::run_seeds() const { return semform::run_seeds(master_seed, seeds); }

fs::path CommandContext::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() ? p : run_dir / p;
}

// ---- artifacts -------------------------------------------------------------

namespace {

constexpr const char* kDatasetFile = "dataset.jsonl";
constexpr const char* kDatasetStatsFile = "dataset_stats.json";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCorporaDir = "corpora";
constexpr const char* kSimilarityFile = "similarity.json";
constexpr const char* kLexicalFile = "lexical.json";
constexpr const char* kClassificationFile = "classification.json";
constexpr const char* kStatsFile = "stats.json";
constexpr const char* kReportsDir = "reports";

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                     std::chrono::system_clock::now())));
}

void log(const CommandContext& ctx, const std::string& msg) {
    if (ctx.log) *ctx.log << msg << '\n';
}

void write_text(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path, std::string_view producer) {
    if (!fs::exists(path))
        throw DataError(fmt::format("{} not found; run `semform {}` first", path.string(), producer));
    std::ifstream in(path, std::ios::binary);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(fmt::format("{} is not valid JSON ({}); rerun `semform {}`", path.string(), e.what(), producer));
    }
}

void record_stage(const CommandContext& ctx, const std::string& stage, json entry) {
    const fs::path path = ctx.run_dir / kManifestFile;
    json m = read_json(path, "ingest");
    const std::string digest = ctx.config.digest();
    if (m.value("config_digest", "") != digest)
        log(ctx, fmt::format("warning: configuration differs from the one recorded at ingest (digest {} vs {})",
                             digest.substr(0, 12), m.value("config_digest", "").substr(0, 12)));
    entry["config_digest"] = digest;
    entry["finished_at"] = utc_now();
    m["stages"][stage] = std::move(entry);
    write_json(path, m);
}

// Providers for one command; counters are added to the context on exit.
class ProviderSet {
public:
    explicit ProviderSet(CommandContext& ctx) : ctx_(ctx) {
        cache_ = std::make_shared<ResponseCache>(ctx.resolve(ctx.config.cache));
        if (ctx.offline) transport_ = std::make_shared<DisabledTransport>();
        else if (ctx.transport) transport_ = ctx.transport;
        else transport_ = std::make_shared<HttpTransport>();
    }
    ~ProviderSet() {
        for (const auto& [_, p] : providers_) {
            ctx_.network_calls += p->network_calls();
            ctx_.cache_hits += p->cache_hits();
        }
    }
    ProviderSet(const ProviderSet&) = delete;
    ProviderSet& operator=(const ProviderSet&) = delete;

    const Provider& get(ProviderKind role) {
        auto it = providers_.find(role);
        if (it != providers_.end()) return *it->second;
        RetryPolicy retry{ctx_.config.retry_attempts, std::chrono::milliseconds(ctx_.config.retry_backoff_ms), 2.0,
                          ctx_.sleep};
        auto p = std::make_unique<Provider>(ctx_.config.providers.at(role), cache_, transport_, retry);
        return *providers_.emplace(role, std::move(p)).first->second;
    }

    std::string summary() const {
        std::size_t calls = 0, hits = 0;
        for (const auto& [_, p] : providers_) {
            calls += p->network_calls();
            hits += p->cache_hits();
        }
        return fmt::format("network calls {}, cache hits {}", calls, hits);
    }

private:
    CommandContext& ctx_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    std::map<ProviderKind, std::unique_ptr<Provider>> providers_;
};

json comparison_json(const std::optional<GroupComparison>& g) {
    if (!g) return nullptr;
    return {{"mean_control", g->mean_control}, {"mean_ad", g->mean_ad},     {"p_value", g->p_value},
            {"statistic", g->detail.statistic}, {"df", g->detail.df.value_or(0.0)}, {"test", g->test},
            {"excluded", g->excluded}};
}

std::optional<GroupComparison> comparison_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    GroupComparison g;
    g.mean_control = j.at("mean_control").get<double>();
    g.mean_ad = j.at("mean_ad").get<double>();
    g.p_value = j.at("p_value").get<double>();
    g.test = j.at("test").get<std::string>();
    g.excluded = j.at("excluded").get<std::size_t>();
    return g;
}

json group_stats_json(const GroupStats& g) {
    return {{"count", g.count}, {"mean_tokens", g.mean_tokens}, {"std_tokens", g.std_tokens}, {"degenerate", g.degenerate}};
}

GroupStats group_stats_from(const json& j) {
    return {j.at("count").get<std::size_t>(), j.at("mean_tokens").get<double>(), j.at("std_tokens").get<double>(),
            j.at("degenerate").get<bool>()};
}

fs::path data_file(const CommandContext& ctx, const std::string& configured, const char* fallback) {
    return configured.empty() ? fs::path(SEMFORM_DATA_DIR) / fallback : ctx.resolve(configured);
}

std::map<TransformationKind, std::vector<ClassificationRun>> runs_from(const json& cls) {
    std::map<TransformationKind, std::vector<ClassificationRun>> out;
    for (const auto& [name, arr] : cls.at("kinds").items()) {
        auto k = parse_kind(name);
        if (!k) throw DataError(fmt::format("classification.json: unknown kind {}", name));
        for (const auto& r : arr) out[*k].push_back(ClassificationRun::from_json(r));
    }
    return out;
}

}  // namespace

Dataset load_ingested(const CommandContext& ctx) {
    const json manifest = read_json(ctx.run_dir / kManifestFile, "ingest");
    const fs::path path = ctx.run_dir / kDatasetFile;
    if (!fs::exists(path)) throw DataError(fmt::format("{} not found; run `semform ingest` first", path.string()));
    std::ifstream in(path, std::ios::binary);
    return parse_jsonl(in, manifest.value("dataset", "dataset"));
}

std::map<TransformationKind, TransformedCorpus> load_aligned_corpora(const CommandContext& ctx, const Dataset& d) {
    const fs::path dir = ctx.run_dir / kCorporaDir;
    std::map<TransformationKind, TransformedCorpus> corpora;
    for (auto k : kAllKinds) {
        const fs::path p = dir / fmt::format("{}.jsonl", to_string(k));
        if (!fs::exists(p)) continue;
        std::ifstream in(p, std::ios::binary);
        corpora[k] = read_corpus_jsonl(in, d.name);
    }
    if (!corpora.contains(TransformationKind::Original))
        throw DataError(fmt::format("{} has no Original corpus; run `semform transform` first", dir.string()));

    std::vector<std::string> common;
    for (const auto& t : d.transcripts) {
        const bool everywhere = std::all_of(corpora.begin(), corpora.end(),
                                            [&](const auto& kv) { return kv.second.find(t.id) != nullptr; });
        if (everywhere) common.push_back(t.id);
    }
    if (common.empty()) throw DataError("no transcript id is present in every corpus");
    if (common.size() < d.size())
        log(ctx, fmt::format("note: {} of {} transcripts are present in every corpus; later stages use those",
                             common.size(), d.size()));
    for (auto& [_, c] : corpora) c = restrict_to(c, common);
    return corpora;
}

// ---- commands --------------------------------------------------------------

void cmd_ingest(CommandContext& ctx) {
    const RunConfig& cfg = ctx.config;
    if (cfg.dataset.empty()) throw UsageError("config key \"dataset\" is required");
    const fs::path path = ctx.resolve(cfg.dataset);
    const DatasetFormat format =
        cfg.dataset_format.value_or(path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Jsonl);
    const Dataset d = load_dataset(path, format);

    fs::create_directories(ctx.run_dir);
    std::ostringstream out;
    write_jsonl(d, out);
    write_text(ctx.run_dir / kDatasetFile, out.str());

    const Tokenizer tokenizer;
    const DatasetStats stats = dataset_stats(d, tokenizer);
    write_json(ctx.run_dir / kDatasetStatsFile, {{"dataset", d.name},
                                                 {"language", d.source_language},
                                                 {"size", d.size()},
                                                 {"fully_split", d.fully_split()},
                                                 {"tokenizer", tokenizer.describe()},
                                                 {"ad", group_stats_json(stats.ad)},
                                                 {"control", group_stats_json(stats.control)}});
    write_json(ctx.run_dir / kManifestFile, {{"dataset", d.name},
                                             {"source_language", d.source_language},
                                             {"config", cfg.to_json()},
                                             {"config_digest", cfg.digest()},
                                             {"stages", json::object()}});
    record_stage(ctx, "ingest", {{"items", d.size()}, {"ad", stats.ad.count}, {"control", stats.control.count}});
    log(ctx, fmt::format("ingest: {} transcripts ({} AD, {} C, language {})", d.size(), stats.ad.count,
                         stats.control.count, d.source_language));
}

void cmd_transform(CommandContext& ctx) {
    const Dataset d = load_ingested(ctx);
    const RunConfig& cfg = ctx.config;
    ProviderSet providers(ctx);
    PipelineConfig pc;
    pc.enabled = cfg.kinds;
    pc.providers = {&providers.get(ProviderKind::Chat), &providers.get(ProviderKind::Translate),
                    &providers.get(ProviderKind::TextToImage), &providers.get(ProviderKind::ImageToText)};
    for (const auto& [k, text] : cfg.prompt_overrides) pc.prompts.override_prompt(k, text);
    pc.target_language = cfg.target_language;
    pc.failure_mode = cfg.failure_mode;
    pc.lenient_threshold = cfg.lenient_threshold;
    pc.max_in_flight = cfg.max_in_flight;
    pc.image_mode = cfg.image_mode;

    const PipelineResult result = run_pipeline(d, pc);

    const fs::path dir = ctx.run_dir / kCorporaDir;
    if (fs::exists(dir))
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".jsonl") fs::remove(entry.path());
    for (const auto& [k, corpus] : result.corpora) {
        std::ostringstream out;
        write_corpus_jsonl(corpus, d, out);
        write_text(dir / fmt::format("{}.jsonl", to_string(k)), out.str());
    }
    json entry = result.manifest;
    entry["provider_usage"] = providers.summary();
    record_stage(ctx, "transform", std::move(entry));
    log(ctx, fmt::format("transform: {} corpora, {} item failures; {}", result.corpora.size(), result.failures.size(),
                         providers.summary()));
}

void cmd_similarity(CommandContext& ctx) {
    const Dataset d = load_ingested(ctx);
    const auto corpora = load_aligned_corpora(ctx, d);
    const auto& opts = ctx.config.metrics;
    ProviderSet providers(ctx);
    const Provider& embedder = providers.get(ProviderKind::Embed);

    const TransformationKind ref_kind =
        corpora.contains(TransformationKind::Translated) ? TransformationKind::Translated : TransformationKind::Original;
    const TransformedCorpus& ref = corpora.at(ref_kind);
    auto scores = [&](const TransformedCorpus& reference, const TransformedCorpus& cand) {
        return json{{"bleu", mean_similarity(reference, cand, Metric::Bleu, nullptr, opts)},
                    {"chrf", mean_similarity(reference, cand, Metric::Chrf, nullptr, opts)},
                    {"cosine", mean_similarity(reference, cand, Metric::Cosine, &embedder, opts)}};
    };
    json kinds = json::object();
    for (auto k : kSimilarityKinds)
        if (corpora.contains(k)) kinds[std::string(to_string(k))] = scores(ref, corpora.at(k));
    json back = nullptr;
    if (corpora.contains(TransformationKind::BackTranslated))
        back = {{"reference", "Original"},
                {"scores", scores(corpora.at(TransformationKind::Original), corpora.at(TransformationKind::BackTranslated))}};

    std::vector<TransformedCorpus> all;
    for (const auto& [_, c] : corpora) all.push_back(c);
    json matrices = json::object();
    for (auto metric : {Metric::Bleu, Metric::Chrf, Metric::Cosine}) {
        const auto m = pairwise_matrix(all, metric, &embedder, opts);
        json labels = json::array();
        for (auto k : m.labels) labels.push_back(to_string(k));
        matrices[std::string(to_string(metric))] = {{"labels", labels}, {"values", m.values}};
    }
    write_json(ctx.run_dir / kSimilarityFile, {{"reference", to_string(ref_kind)},
                                               {"items", ref.items.size()},
                                               {"bleu_max_n", opts.bleu.max_n},
                                               {"chrf_max_n", opts.chrf.max_n},
                                               {"chrf_beta", opts.chrf.beta},
                                               {"embedding", embedder.config().summary()},
                                               {"kinds", kinds},
                                               {"back_translation", back},
                                               {"matrices", matrices}});
    record_stage(ctx, "similarity", {{"reference", to_string(ref_kind)}, {"provider_usage", providers.summary()}});
    log(ctx, fmt::format("similarity: {} kinds against {}; {}", kinds.size(), to_string(ref_kind), providers.summary()));
}

void cmd_lexical(CommandContext& ctx) {
    const Dataset d = load_ingested(ctx);
    const auto corpora = load_aligned_corpora(ctx, d);
    const RunConfig& cfg = ctx.config;
    const FrequencyTable table =
        FrequencyTable::load(data_file(ctx, cfg.frequency_table, "freq_en.tsv"), cfg.frequency_language);
    const LexiconTagger lexicon = LexiconTagger::load(data_file(ctx, cfg.pos_lexicon, "pos_lexicon_en.tsv"));
    std::optional<AnnotationTagger> annotations;
    if (!cfg.pos_annotations.empty()) annotations = AnnotationTagger::load(ctx.resolve(cfg.pos_annotations));
    const Tokenizer tokenizer;

    json kinds = json::object();
    json skipped = json::object();
    for (const auto& [k, corpus] : corpora) {
        if (!same_language(corpus.language, table.language())) {
            skipped[std::string(to_string(k))] = fmt::format("language {} differs from the frequency table ({})",
                                                             corpus.language, table.language());
            continue;
        }
        // External annotations describe the untransformed transcripts only.
        const Tagger& tagger = (annotations && k == TransformationKind::Original)
                                   ? static_cast<const Tagger&>(*annotations)
                                   : static_cast<const Tagger&>(lexicon);
        std::vector<Group> groups;
        for (const auto& item : corpus.items) groups.push_back(d.find(item.source_id)->group);
        const auto docs =
            measure_documents(corpus.ids(), corpus.texts(), groups, tokenizer, table, tagger, cfg.oov_zipf);
        std::vector<double> ttr_v, lf_v, rb_v, vb_v;
        std::vector<std::optional<double>> pnr_v;
        for (const auto& m : docs) {
            ttr_v.push_back(m.ttr);
            lf_v.push_back(m.zipf);
            pnr_v.push_back(m.pos.pnr);
            rb_v.push_back(m.pos.adv_ratio);
            vb_v.push_back(m.pos.part_ratio);
        }
        json measures = json::object();
        json reasons = json::object();
        auto compare = [&](const char* name, auto& values) {
            try {
                measures[name] = comparison_json(group_compare(values, groups));
            } catch (const DomainError& e) {
                measures[name] = nullptr;
                reasons[name] = e.what();
            }
        };
        compare("ttr", ttr_v);
        compare("lf", lf_v);
        compare("pnr", pnr_v);
        compare("RB", rb_v);
        compare("VB", vb_v);
        kinds[std::string(to_string(k))] = {{"measures", measures}, {"undefined", reasons}, {"documents", docs.size()}};
    }
    std::string tagger_desc = lexicon.describe();
    if (annotations) tagger_desc = fmt::format("{} for Original, {} otherwise", annotations->describe(), tagger_desc);
    write_json(ctx.run_dir / kLexicalFile, {{"frequency_language", table.language()},
                                            {"frequency_entries", table.size()},
                                            {"oov_zipf", cfg.oov_zipf},
                                            {"tokenizer", tokenizer.describe()},
                                            {"tagger", tagger_desc},
                                            {"kinds", kinds},
                                            {"skipped", skipped}});
    record_stage(ctx, "lexical", {{"kinds", kinds.size()}, {"skipped", skipped.size()}});
    log(ctx, fmt::format("lexical: {} kinds measured, {} skipped", kinds.size(), skipped.size()));
}

void cmd_classify(CommandContext& ctx) {
    const Dataset d = load_ingested(ctx);
    const auto corpora = load_aligned_corpora(ctx, d);
    const RunConfig& cfg = ctx.config;
    ProviderSet providers(ctx);
    const Provider& embedder = providers.get(ProviderKind::Embed);
    const auto seeds = cfg.run_seeds();
    const bool fixed = d.fully_split();

    json kinds = json::object();
    std::size_t degenerate = 0;
    for (const auto& [k, corpus] : corpora) {
        const auto runs = fixed ? fixed_split_evaluate(corpus, d, embedder, cfg.train, seeds)
                                : cross_validate(corpus, d, cfg.k, seeds, embedder, cfg.train);
        json arr = json::array();
        for (const auto& r : runs) {
            arr.push_back(r.to_json());
            degenerate += r.degenerate;
        }
        kinds[std::string(to_string(k))] = arr;
    }
    write_json(ctx.run_dir / kClassificationFile, {{"mode", fixed ? "fixed_split" : "cross_validation"},
                                                   {"k", fixed ? 0 : cfg.k},
                                                   {"seeds", seeds},
                                                   {"master_seed", cfg.master_seed},
                                                   {"train", cfg.train.to_json()},
                                                   {"embedding", embedder.config().summary()},
                                                   {"kinds", kinds}});
    record_stage(ctx, "classify", {{"mode", fixed ? "fixed_split" : "cross_validation"},
                                   {"degenerate_runs", degenerate},
                                   {"provider_usage", providers.summary()}});
    log(ctx, fmt::format("classify: {} kinds x {} seeds ({}); {}", kinds.size(), seeds.size(),
                         fixed ? "fixed split" : fmt::format("{}-fold CV", cfg.k), providers.summary()));
    if (degenerate > 0) log(ctx, fmt::format("warning: {} runs collapsed to a single predicted class", degenerate));
}

void cmd_stats(CommandContext& ctx) {
    const json cls = read_json(ctx.run_dir / kClassificationFile, "classify");
    const json sim = read_json(ctx.run_dir / kSimilarityFile, "similarity");
    const auto runs = runs_from(cls);
    const auto base = runs.find(TransformationKind::Original);
    if (base == runs.end()) throw DataError("classification.json has no Original runs; rerun `semform classify`");

    json significance = json::object();
    for (const auto& [k, rs] : runs) {
        if (k == TransformationKind::Original) continue;
        const auto s = compare_runs(base->second, rs);
        significance[std::string(to_string(k))] = {{"p_value", s.p_value}, {"method", s.method}, {"improves", s.improves}};
    }

    std::vector<double> cos, f1;
    json used = json::array();
    for (auto k : kSimilarityKinds) {
        const std::string name(to_string(k));
        if (!sim.at("kinds").contains(name) || !runs.contains(k)) continue;
        cos.push_back(sim["kinds"][name].at("cosine").get<double>());
        double m = 0.0;
        for (const auto& r : runs.at(k)) m += r.macro_f1;
        f1.push_back(m / static_cast<double>(runs.at(k).size()));
        used.push_back(name);
    }
    json correlation = {{"kinds", used}, {"cosine", cos}, {"macro_f1", f1}};
    try {
        const auto r = pearson(cos, f1);
        correlation["r"] = r.statistic;
        correlation["p_value"] = r.p_value;
        correlation["df"] = r.df.value_or(0.0);
    } catch (const DomainError& e) {
        correlation["r"] = nullptr;
        correlation["p_value"] = nullptr;
        correlation["reason"] = e.what();
    }
    write_json(ctx.run_dir / kStatsFile,
               {{"baseline", "Original"}, {"significance", significance}, {"correlation", correlation}});
    record_stage(ctx, "stats", {{"comparisons", significance.size()}});
    log(ctx, fmt::format("stats: {} paired comparisons, correlation over {} kinds", significance.size(), used.size()));
}

void cmd_report(CommandContext& ctx) {
    const json ds = read_json(ctx.run_dir / kDatasetStatsFile, "ingest");
    const json sim = read_json(ctx.run_dir / kSimilarityFile, "similarity");
    const json lex = read_json(ctx.run_dir / kLexicalFile, "lexical");
    const json cls = read_json(ctx.run_dir / kClassificationFile, "classify");
    const json st = read_json(ctx.run_dir / kStatsFile, "stats");

    ReportNotes notes;
    notes.metrics.bleu.max_n = sim.at("bleu_max_n").get<int>();
    notes.metrics.chrf.max_n = sim.at("chrf_max_n").get<int>();
    notes.metrics.chrf.beta = sim.at("chrf_beta").get<double>();
    notes.tokenizer = lex.at("tokenizer").get<std::string>();
    notes.tagger = lex.at("tagger").get<std::string>();
    ReportNotes metric_notes = notes;
    metric_notes.tagger.clear();

    std::vector<ReportTable> tables;
    DatasetStats stats{group_stats_from(ds.at("ad")), group_stats_from(ds.at("control"))};
    tables.push_back(dataset_table({{ds.at("dataset").get<std::string>(), stats}}, ds.at("tokenizer").get<std::string>()));

    std::map<TransformationKind, SimilarityScore> scores;
    for (const auto& [name, s] : sim.at("kinds").items())
        scores[*parse_kind(name)] = {s.at("bleu").get<double>(), s.at("chrf").get<double>(), s.at("cosine").get<double>()};
    ReportTable sim_table = similarity_table(scores, *parse_kind(sim.at("reference").get<std::string>()), metric_notes);
    if (!sim.at("back_translation").is_null()) {
        const auto& b = sim["back_translation"]["scores"];
        sim_table.footer.insert(sim_table.footer.begin() + 1,
                                fmt::format("Back Translated vs Original: chrF {:.2f}, BLEU {:.2f}, Cosine {:.2f}",
                                            b.at("chrf").get<double>(), b.at("bleu").get<double>(),
                                            b.at("cosine").get<double>()));
    }
    tables.push_back(std::move(sim_table));

    const auto runs = runs_from(cls);
    ReportTable cls_table = classification_table(runs, TransformationKind::Original, metric_notes);
    cls_table.footer.insert(cls_table.footer.begin(),
                            cls.at("mode") == "fixed_split"
                                ? std::string("Protocol: fixed train/test split")
                                : fmt::format("Protocol: stratified {}-fold cross-validation", cls.at("k").get<int>()));
    tables.push_back(std::move(cls_table));
    if (runs.contains(TransformationKind::BackTranslated) && runs.contains(TransformationKind::Translated))
        tables.push_back(back_translation_table(runs, ds.at("language").get<std::string>(), metric_notes));

    MeasureComparisons lexical;
    MeasureReasons reasons;
    for (const auto& [name, entry] : lex.at("kinds").items()) {
        const auto kind = *parse_kind(name);
        for (const auto& [measure, c] : entry.at("measures").items()) lexical[kind][measure] = comparison_from(c);
        for (const auto& [measure, why] : entry.at("undefined").items())
            reasons[kind][measure] = why.get<std::string>();
    }
    ReportTable lex_table = group_measure_table("lexical", "Lexical measures by group (ttr, lf = mean Zipf frequency)",
                                                {"ttr", "lf"}, lexical, notes, reasons);
    ReportTable pos_table = group_measure_table(
        "pos", "Part-of-speech measures by group (pnr, RB = adverb ratio, VB = participle ratio)", {"pnr", "RB", "VB"},
        lexical, notes, reasons);
    for (const auto& [name, why] : lex.at("skipped").items()) {
        const std::string line = fmt::format("{} not measured: {}", name, why.get<std::string>());
        lex_table.footer.push_back(line);
        pos_table.footer.push_back(line);
    }
    tables.push_back(std::move(lex_table));
    tables.push_back(std::move(pos_table));

    ReportTable corr;
    corr.name = "correlation";
    corr.title = "Correlation of mean cosine similarity with mean macro-F1";
    corr.row_header = "Pair";
    corr.columns = {"r", "p", "n"};
    const json& c = st.at("correlation");
    auto opt = [](const json& v) { return v.is_null() ? std::optional<double>() : v.get<double>(); };
    ReportRow row{"Cosine vs macro-F1", {}};
    auto num = [](std::optional<double> v, int precision, bool p_value = false) {
        ReportCell cell;
        cell.value = v;
        cell.precision = precision;
        cell.p_value = p_value;
        return cell;
    };
    row.cells = {num(opt(c.at("r")), 3), num(opt(c.at("p_value")), 3, true),
                 num(static_cast<double>(c.at("kinds").size()), 0)};
    corr.rows.push_back(row);
    corr.footer.push_back(fmt::format("Kinds: {}", fmt::join(c.at("kinds").get<std::vector<std::string>>(), ", ")));
    if (c.contains("reason")) corr.footer.push_back("Not computable: " + c["reason"].get<std::string>());
    tables.push_back(std::move(corr));

    const fs::path dir = ctx.run_dir / kReportsDir;
    fs::create_directories(dir);
    for (const auto& t : tables)
        for (auto f : ctx.config.formats)
            write_text(dir / fmt::format("table_{}.{}", t.name, extension(f)), render(t, f));
    for (const auto& [metric, m] : sim.at("matrices").items()) {
        PairwiseMatrix pm;
        for (const auto& l : m.at("labels")) pm.labels.push_back(*parse_kind(l.get<std::string>()));
        pm.values = m.at("values").get<std::vector<std::vector<double>>>();
        std::ostringstream out;
        write_matrix_csv(pm, out);
        write_text(dir / fmt::format("matrix_{}.csv", metric), out.str());
    }
    record_stage(ctx, "report", {{"tables", tables.size()}});
    log(ctx, fmt::format("report: {} tables written to {}", tables.size(), dir.string()));
}

void cmd_run(CommandContext& ctx) {
    cmd_ingest(ctx);
    cmd_transform(ctx);
    cmd_similarity(ctx);
    cmd_lexical(ctx);
    cmd_classify(ctx);
    cmd_stats(ctx);
    cmd_report(ctx);
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"ingest", "transform", "similarity", "lexical",
                                                   "classify", "stats", "report", "run"};
    return names;
}

int exit_code_for(std::exception_ptr e) {
    try {
        std::rethrow_exception(e);
    } catch (const UsageError&) {
        return kExitUsage;
    } catch (const ProviderError&) {
        return kExitProvider;
    } catch (const DataError&) {
        return kExitData;
    } catch (const DomainError&) {
        return kExitData;
    } catch (...) {
        return kExitData;
    }
}

int run_command(const std::string& name, CommandContext& ctx, std::ostream& err) {
    static const std::map<std::string, void (*)(CommandContext&)> table = {
        {"ingest", cmd_ingest},     {"transform", cmd_transform}, {"similarity", cmd_similarity},
        {"lexical", cmd_lexical},   {"classify", cmd_classify},   {"stats", cmd_stats},
        {"report", cmd_report},     {"run", cmd_run}};
    try {
        auto it = table.find(name);
        if (it == table.end()) throw UsageError(fmt::format("unknown command \"{}\"", name));
        it->second(ctx);
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(std::current_exception());
    }
}

}  // namespace semform
