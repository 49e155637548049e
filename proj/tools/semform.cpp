#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "semform/cli.hpp"

namespace {

const std::map<std::string, std::string> kDescriptions = {
    {"ingest", "Validate the dataset and copy it into the run directory"},
    {"transform", "Generate every enabled transformation of the transcripts"},
    {"similarity", "Score transformations against the reference text (BLEU, chrF, cosine)"},
    {"lexical", "Compare lexical and part-of-speech measures between groups"},
    {"classify", "Train and evaluate the AD/Control classifier per transformation"},
    {"stats", "Paired significance tests and the similarity/performance correlation"},
    {"report", "Write tables and matrices under <run-dir>/reports"},
    {"run", "All stages in order"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface-form transformation pipeline for AD speech transcripts"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    std::string run_dir = ".";
    std::string formats;
    bool offline = false;
    bool list_keys = false;
    app.add_option("--config", config_path, "Flat key = value configuration file");
    app.add_option("--run-dir", run_dir, "Directory holding stage artifacts")->capture_default_str();
    app.add_option("--format", formats, "Report formats, comma separated (md,csv,json)");
    app.add_flag("--offline", offline, "Forbid network access; the cache must satisfy every provider call");
    app.add_flag("--list-keys", list_keys, "Print accepted configuration keys and exit");

    for (const auto& name : semform::command_names()) app.add_subcommand(name, kDescriptions.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (list_keys) {
            for (const auto& k : semform::RunConfig::keys()) std::cout << k << '\n';
            return semform::kExitOk;
        }
        app.exit(e);
        return semform::kExitUsage;
    }

    semform::CommandContext ctx;
    ctx.run_dir = run_dir;
    ctx.offline = offline;
    ctx.log = &std::cerr;
    try {
        if (!config_path.empty()) ctx.config = semform::RunConfig::load(config_path);
        if (!formats.empty()) ctx.config.set("formats", formats);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return semform::exit_code_for(std::current_exception());
    }
    return semform::run_command(app.get_subcommands().front()->get_name(), ctx, std::cerr);
}
