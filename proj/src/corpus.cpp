#include "semform/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "semform/error.hpp"
#include "semform/lexstats.hpp"

namespace semform {

using nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

struct RawRow {
    std::size_t row = 0;
    std::map<std::string, std::string> fields;
    std::set<std::string> present;
};

Transcript to_transcript(const RawRow& raw) {
    auto require = [&](const char* key) -> const std::string& {
        auto it = raw.fields.find(key);
        if (it == raw.fields.end())
            throw DataError(fmt::format("row {}: missing field \"{}\"", raw.row, key));
        return it->second;
    };
    Transcript t;
    t.id = require("id");
    t.text = require("text");
    const std::string& group = require("group");
    auto g = parse_group(group);
    if (!g) throw DataError(fmt::format("row {}: unknown group label \"{}\" (expected AD or C)", raw.row, group));
    t.group = *g;
    if (auto it = raw.fields.find("split"); it != raw.fields.end() && !it->second.empty()) {
        auto s = parse_split(it->second);
        if (!s) throw DataError(fmt::format("row {}: unknown split \"{}\" (expected train or test)", raw.row, it->second));
        t.split = *s;
    }
    t.language = require("language");
    return t;
}

Dataset finish(std::vector<RawRow> rows, std::string name) {
    Dataset d;
    d.name = std::move(name);
    for (const auto& r : rows) d.transcripts.push_back(to_transcript(r));
    validate(d);
    if (!d.transcripts.empty()) d.source_language = d.transcripts.front().language;
    for (std::size_t i = 0; i < d.transcripts.size(); ++i)
        if (d.transcripts[i].language != d.source_language)
            throw DataError(fmt::format("row {}: language \"{}\" differs from dataset language \"{}\"", i + 1,
                                        d.transcripts[i].language, d.source_language));
    return d;
}

// RFC 4180: fields separated by commas, optionally double-quoted, "" escapes
// a quote, quoted fields may span lines.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    char c;
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) throw DataError("csv: stray quote inside unquoted field");
                in_quotes = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n': end_record(); break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    return records;
}

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string_view to_string(Group g) { return g == Group::AD ? "AD" : "C"; }
std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::optional<Group> parse_group(std::string_view label) {
    const std::string l = lower_ascii(label);
    if (l == "ad") return Group::AD;
    if (l == "c" || l == "control") return Group::Control;
    return std::nullopt;
}

std::optional<Split> parse_split(std::string_view label) {
    const std::string l = lower_ascii(label);
    if (l == "train") return Split::Train;
    if (l == "test") return Split::Test;
    return std::nullopt;
}

std::optional<DatasetFormat> parse_format(std::string_view name) {
    const std::string l = lower_ascii(name);
    if (l == "jsonl") return DatasetFormat::Jsonl;
    if (l == "csv") return DatasetFormat::Csv;
    return std::nullopt;
}

bool is_language_tag(std::string_view tag) {
    if (tag.empty()) return false;
    std::size_t start = 0;
    bool first = true;
    while (start <= tag.size()) {
        std::size_t end = tag.find('-', start);
        if (end == std::string_view::npos) end = tag.size();
        const std::string_view sub = tag.substr(start, end - start);
        if (first) {
            if (sub.size() < 2 || sub.size() > 3) return false;
            if (!std::all_of(sub.begin(), sub.end(), [](unsigned char c) { return std::isalpha(c); })) return false;
        } else {
            if (sub.size() < 2 || sub.size() > 8) return false;
            if (!std::all_of(sub.begin(), sub.end(), [](unsigned char c) { return std::isalnum(c); })) return false;
        }
        first = false;
        if (end == tag.size()) break;
        start = end + 1;
    }
    return true;
}

const Transcript* Dataset::find(std::string_view id) const {
    for (const auto& t : transcripts)
        if (t.id == id) return &t;
    return nullptr;
}

std::vector<Group> Dataset::labels() const {
    std::vector<Group> out;
    out.reserve(transcripts.size());
    for (const auto& t : transcripts) out.push_back(t.group);
    return out;
}

std::size_t Dataset::count(Group g) const {
    return static_cast<std::size_t>(
        std::count_if(transcripts.begin(), transcripts.end(), [g](const Transcript& t) { return t.group == g; }));
}

bool Dataset::fully_split() const {
    return !transcripts.empty() &&
           std::all_of(transcripts.begin(), transcripts.end(), [](const Transcript& t) { return t.split.has_value(); });
}

void validate(const Dataset& d) {
    std::set<std::string_view> seen;
    for (std::size_t i = 0; i < d.transcripts.size(); ++i) {
        const auto& t = d.transcripts[i];
        const std::size_t row = i + 1;
        if (t.id.empty()) throw DataError(fmt::format("row {}: empty id", row));
        if (!seen.insert(t.id).second) throw DataError(fmt::format("row {}: duplicate id \"{}\"", row, t.id));
        if (is_blank(t.text)) throw DataError(fmt::format("row {} (id \"{}\"): empty text", row, t.id));
        if (!is_language_tag(t.language))
            throw DataError(fmt::format("row {} (id \"{}\"): malformed language tag \"{}\"", row, t.id, t.language));
    }
}

Dataset parse_jsonl(std::istream& in, std::string name) {
    std::vector<RawRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(fmt::format("row {}: invalid JSON ({})", rows.size() + 1, e.what()));
        }
        if (!obj.is_object()) throw DataError(fmt::format("row {}: expected a JSON object", rows.size() + 1));
        RawRow raw;
        raw.row = rows.size() + 1;
        for (const auto& [key, value] : obj.items()) {
            if (value.is_string())
                raw.fields[key] = value.get<std::string>();
            else if (!value.is_null())
                throw DataError(fmt::format("row {}: field \"{}\" must be a string", raw.row, key));
        }
        rows.push_back(std::move(raw));
    }
    return finish(std::move(rows), std::move(name));
}

Dataset parse_csv(std::istream& in, std::string name) {
    auto records = read_csv_records(in);
    if (records.empty()) return finish({}, std::move(name));
    const auto header = records.front();
    std::vector<RawRow> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        RawRow raw;
        raw.row = r;
        const auto& rec = records[r];
        if (rec.size() != header.size())
            throw DataError(fmt::format("row {}: {} fields, header has {}", r, rec.size(), header.size()));
        for (std::size_t c = 0; c < header.size(); ++c) raw.fields[header[c]] = rec[c];
        rows.push_back(std::move(raw));
    }
    return finish(std::move(rows), std::move(name));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open dataset file {}", path.string()));
    std::string name = path.stem().string();
    return format == DatasetFormat::Jsonl ? parse_jsonl(in, std::move(name)) : parse_csv(in, std::move(name));
}

void write_jsonl(const Dataset& d, std::ostream& out) {
    for (const auto& t : d.transcripts) {
        json obj{{"id", t.id}, {"text", t.text}, {"group", to_string(t.group)}, {"language", t.language}};
        if (t.split) obj["split"] = to_string(*t.split);
        out << obj.dump() << '\n';
    }
}

void write_csv(const Dataset& d, std::ostream& out) {
    out << "id,text,group,split,language\r\n";
    for (const auto& t : d.transcripts) {
        out << csv_escape(t.id) << ',' << csv_escape(t.text) << ',' << to_string(t.group) << ','
            << (t.split ? to_string(*t.split) : "") << ',' << csv_escape(t.language) << "\r\n";
    }
}

DatasetStats dataset_stats(const Dataset& d, const Tokenizer& tokenizer) {
    if (d.empty()) throw DataError(fmt::format("dataset \"{}\" is empty", d.name));
    std::vector<double> ad, control;
    for (const auto& t : d.transcripts)
        (t.group == Group::AD ? ad : control).push_back(static_cast<double>(tokenizer.count(t.text)));
    auto summarize = [](const std::vector<double>& xs) {
        GroupStats g;
        g.count = xs.size();
        if (xs.empty()) {
            g.degenerate = true;
            return g;
        }
        g.mean_tokens = mean(xs);
        if (xs.size() < 2) {
            g.degenerate = true;
        } else {
            g.std_tokens = std::sqrt(sample_variance(xs));
        }
        return g;
    };
    return {summarize(ad), summarize(control)};
}

std::vector<std::string> FoldAssignment::members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : fold_of)
        if (f == fold) out.push_back(id);
    return out;
}

std::size_t FoldAssignment::fold_size(int fold) const {
    return static_cast<std::size_t>(
        std::count_if(fold_of.begin(), fold_of.end(), [fold](const auto& kv) { return kv.second == fold; }));
}

FoldAssignment split_folds(const Dataset& d, int k, std::uint64_t seed) {
    if (k < 2) throw DataError(fmt::format("split_folds: k={} must be >= 2", k));
    std::vector<std::string> ad, control;
    for (const auto& t : d.transcripts) (t.group == Group::AD ? ad : control).push_back(t.id);
    const auto kk = static_cast<std::size_t>(k);
    if (ad.size() < kk || control.size() < kk)
        throw DataError(fmt::format("split_folds: k={} exceeds group size (AD {}, C {})", k, ad.size(), control.size()));

    // Explicit Fisher-Yates so assignments do not depend on the standard
    // library's shuffle implementation.
    std::mt19937_64 rng(seed);
    auto shuffle = [&rng](std::vector<std::string>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
    };
    shuffle(ad);
    shuffle(control);

    FoldAssignment out;
    out.k = k;
    std::size_t slot = 0;
    for (const auto* group : {&ad, &control})
        for (const auto& id : *group) out.fold_of[id] = static_cast<int>(slot++ % kk);
    return out;
}

std::pair<Dataset, Dataset> fixed_split(const Dataset& d) {
    Dataset train{d.name + "/train", {}, d.source_language};
    Dataset test{d.name + "/test", {}, d.source_language};
    for (const auto& t : d.transcripts) {
        if (!t.split) throw DataError(fmt::format("transcript \"{}\" has no split tag", t.id));
        (*t.split == Split::Train ? train : test).transcripts.push_back(t);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace semform
