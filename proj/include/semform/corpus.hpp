#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace semform {

class Tokenizer;

enum class Group { AD, Control };
enum class Split { Train, Test };
enum class DatasetFormat { Jsonl, Csv };

/// Canonical output labels: "AD" / "C".
std::string_view to_string(Group g);
std::string_view to_string(Split s);
/// Case-insensitive; accepts "AD", "C" and "Control".
std::optional<Group> parse_group(std::string_view label);
std::optional<Split> parse_split(std::string_view label);
std::optional<DatasetFormat> parse_format(std::string_view name);

/// Loose BCP-47 shape check: primary subtag of 2-3 letters, then 2-8 char
/// alphanumeric subtags.
bool is_language_tag(std::string_view tag);

struct Transcript {
    std::string id;
    std::string text;
    Group group = Group::Control;
    std::optional<Split> split;
    std::string language;
};

struct Dataset {
    std::string name;
    std::vector<Transcript> transcripts;
    std::string source_language;

    std::size_t size() const { return transcripts.size(); }
    bool empty() const { return transcripts.empty(); }
    const Transcript* find(std::string_view id) const;
    std::vector<Group> labels() const;
    std::size_t count(Group g) const;
    /// True when every transcript carries a split tag.
    bool fully_split() const;
};

/// Throws DataError on duplicate or empty ids, empty text and bad language
/// tags. Row numbers in messages are 1-based.
void validate(const Dataset& d);

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
Dataset parse_jsonl(std::istream& in, std::string name);
Dataset parse_csv(std::istream& in, std::string name);

/// Canonical JSONL: one object per line, keys sorted, groups as "AD"/"C".
void write_jsonl(const Dataset& d, std::ostream& out);
void write_csv(const Dataset& d, std::ostream& out);

struct GroupStats {
    std::size_t count = 0;
    double mean_tokens = 0.0;
    /// Sample (n-1) standard deviation; 0 when count < 2.
    double std_tokens = 0.0;
    /// Set when count < 2 and the std is not meaningful.
    bool degenerate = false;
};

struct DatasetStats {
    GroupStats ad;
    GroupStats control;

    const GroupStats& of(Group g) const { return g == Group::AD ? ad : control; }
    std::size_t total() const { return ad.count + control.count; }
};

DatasetStats dataset_stats(const Dataset& d, const Tokenizer& tokenizer);

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> fold_of;

    std::vector<std::string> members(int fold) const;
    std::size_t fold_size(int fold) const;
    friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Stratified k-fold partition. Ids of each group are shuffled with a
/// seeded generator, then dealt round-robin (AD first, then Control) so
/// fold sizes and per-fold group counts differ by at most one.
FoldAssignment split_folds(const Dataset& d, int k, std::uint64_t seed);

/// Partition by split tag, order preserved. Throws DataError naming the
/// first untagged id.
std::pair<Dataset, Dataset> fixed_split(const Dataset& d);

}  // namespace semform
