#include "semform/transformed_corpus.hpp"

#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "semform/error.hpp"

namespace semform {

using nlohmann::json;

namespace {
struct KindInfo {
    TransformationKind kind;
    std::string_view id;
    std::string_view display;
    int step;
};

constexpr KindInfo kKindInfo[] = {
    {TransformationKind::Original, "Original", "Original", 0},
    {TransformationKind::Translated, "Translated", "Translated English", 1},
    {TransformationKind::ShortSummary, "ShortSummary", "Short Summaries", 2},
    {TransformationKind::MediumSummary, "MediumSummary", "Medium Summaries", 2},
    {TransformationKind::LongSummary, "LongSummary", "Long Summaries", 2},
    {TransformationKind::Storyboard, "Storyboard", "Storyboard", 2},
    {TransformationKind::ImageDescription, "ImageDescription", "Image Description", 3},
    {TransformationKind::BackTranslated, "BackTranslated", "Back Translated", 1},
};

const KindInfo& info(TransformationKind k) {
    for (const auto& i : kKindInfo)
        if (i.kind == k) return i;
    return kKindInfo[0];
}
}  // namespace

std::string_view to_string(TransformationKind k) { return info(k).id; }
std::string_view display_name(TransformationKind k) { return info(k).display; }
int pipeline_step(TransformationKind k) { return info(k).step; }

std::optional<TransformationKind> parse_kind(std::string_view name) {
    for (const auto& i : kKindInfo)
        if (i.id == name) return i.kind;
    return std::nullopt;
}

std::vector<std::string> TransformedCorpus::ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& i : items) out.push_back(i.source_id);
    return out;
}

std::vector<std::string> TransformedCorpus::texts() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& i : items) out.push_back(i.text);
    return out;
}

const TransformedItem* TransformedCorpus::find(std::string_view id) const {
    for (const auto& i : items)
        if (i.source_id == id) return &i;
    return nullptr;
}

TransformedCorpus original_corpus(const Dataset& d) {
    TransformedCorpus c;
    c.kind = TransformationKind::Original;
    c.dataset_name = d.name;
    c.language = d.source_language;
    for (const auto& t : d.transcripts) c.items.push_back({t.id, t.text, {}});
    return c;
}

void write_corpus_jsonl(const TransformedCorpus& c, const Dataset& source, std::ostream& out) {
    for (const auto& item : c.items) {
        const Transcript* t = source.find(item.source_id);
        if (!t) throw DataError(fmt::format("corpus item \"{}\" is not in dataset \"{}\"", item.source_id, source.name));
        json obj{{"id", item.source_id},       {"text", item.text},         {"group", to_string(t->group)},
                 {"language", c.language},     {"kind", to_string(c.kind)}, {"provenance", item.provenance}};
        if (t->split) obj["split"] = to_string(*t->split);
        out << obj.dump() << '\n';
    }
}

TransformedCorpus read_corpus_jsonl(std::istream& in, std::string dataset_name) {
    TransformedCorpus c;
    c.dataset_name = std::move(dataset_name);
    std::string line;
    std::size_t row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++row;
        json obj;
        try {
            obj = json::parse(line);
            auto kind = parse_kind(obj.at("kind").get<std::string>());
            if (!kind) throw DataError(fmt::format("row {}: unknown kind {}", row, obj.at("kind").dump()));
            if (first) {
                c.kind = *kind;
                c.language = obj.at("language").get<std::string>();
                first = false;
            } else if (*kind != c.kind) {
                throw DataError(fmt::format("row {}: mixed transformation kinds in one corpus file", row));
            }
            c.items.push_back({obj.at("id").get<std::string>(), obj.at("text").get<std::string>(),
                               obj.value("provenance", std::vector<std::string>{})});
        } catch (const json::exception& e) {
            throw DataError(fmt::format("row {}: {}", row, e.what()));
        }
    }
    return c;
}

TransformedCorpus restrict_to(const TransformedCorpus& c, const std::vector<std::string>& ids) {
    TransformedCorpus out{c.kind, c.dataset_name, c.language, {}};
    for (const auto& id : ids) {
        const auto* item = c.find(id);
        if (!item) throw DataError(fmt::format("corpus {} has no item \"{}\"", to_string(c.kind), id));
        out.items.push_back(*item);
    }
    return out;
}

}  // namespace semform
