#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semform/classifier.hpp"
#include "semform/corpus.hpp"
#include "semform/providers.hpp"
#include "semform/report.hpp"
#include "semform/textmetrics.hpp"
#include "semform/transform.hpp"

namespace semform {

/// Bad command line or configuration; exit status 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitProvider = 3;

/// Everything a run needs. Loaded from flat "key = value" text; see
/// RunConfig::keys() for the accepted keys.
struct RunConfig {
    std::string dataset;
    std::optional<DatasetFormat> dataset_format;
    std::set<TransformationKind> kinds{kAllKinds.begin(), kAllKinds.end()};
    std::map<ProviderKind, ProviderConfig> providers;
    std::map<TransformationKind, std::string> prompt_overrides;
    int k = 5;
    std::size_t seeds = 10;
    std::uint64_t master_seed = 0;
    TrainConfig train;
    std::string cache = "cache";
    FailureMode failure_mode = FailureMode::Strict;
    double lenient_threshold = 0.9;
    std::string target_language = "en";
    ImageMode image_mode = ImageMode::PerStoryboard;
    int max_in_flight = 4;
    MetricOptions metrics;
    std::string frequency_table;
    std::string frequency_language = "en";
    std::string pos_lexicon;
    std::string pos_annotations;
    double oov_zipf = 0.0;
    std::vector<ReportFormat> formats{ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json};
    int retry_attempts = 3;
    int retry_backoff_ms = 1000;

    RunConfig();

    /// Applies one setting. Throws UsageError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    static RunConfig parse(std::istream& in);
    static RunConfig load(const std::filesystem::path& path);
    static const std::vector<std::string>& keys();

    nlohmann::json to_json() const;
    std::string digest() const;
    std::vector<std::uint64_t> run_seeds() const;
};

/// Shared state for one CLI invocation.
struct CommandContext {
    std::filesystem::path run_dir = ".";
    RunConfig config;
    /// Forbid network access; the cache or mock backends must satisfy every call.
    bool offline = false;
    std::ostream* log = nullptr;
    /// Overrides the HTTP transport (tests).
    std::shared_ptr<Transport> transport;
    /// Overrides retry sleeping (tests).
    std::function<void(std::chrono::milliseconds)> sleep;
    /// Provider counters accumulated over the commands run with this context.
    std::size_t network_calls = 0;
    std::size_t cache_hits = 0;

    std::filesystem::path resolve(const std::string& path) const;
};

// Stage commands. Each reads and writes artifacts in the run directory and
// throws on failure; run_command maps exceptions to exit codes.
void cmd_ingest(CommandContext& ctx);
void cmd_transform(CommandContext& ctx);
void cmd_similarity(CommandContext& ctx);
void cmd_lexical(CommandContext& ctx);
void cmd_classify(CommandContext& ctx);
void cmd_stats(CommandContext& ctx);
void cmd_report(CommandContext& ctx);
/// ingest -> transform -> similarity -> lexical -> classify -> stats -> report.
void cmd_run(CommandContext& ctx);

const std::vector<std::string>& command_names();

/// Runs a named command, printing errors to `err`. Returns the exit status.
int run_command(const std::string& name, CommandContext& ctx, std::ostream& err);

/// Exit status for an in-flight exception.
int exit_code_for(std::exception_ptr e);

/// Kinds whose corpora exist in the run directory, restricted to the ids
/// every one of them covers, in dataset order.
std::map<TransformationKind, TransformedCorpus> load_aligned_corpora(const CommandContext& ctx,
                                                                     const Dataset& d);

/// Dataset saved by cmd_ingest.
Dataset load_ingested(const CommandContext& ctx);

}  // namespace semform
