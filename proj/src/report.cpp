#include "semform/report.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "semform/error.hpp"
#include "semform/stattests.hpp"

namespace semform {

using nlohmann::json;

namespace {

constexpr std::string_view kMissing = "—";

double column_max(const ReportTable& t, std::size_t c, bool& any) {
    double best = 0.0;
    any = false;
    for (const auto& r : t.rows) {
        const auto& v = r.cells[c].value;
        if (!v) continue;
        if (!any || *v > best) best = *v;
        any = true;
    }
    return best;
}

void bold_maxima(ReportTable& t) {
    for (auto c : t.maxima_columns) {
        bool any = false;
        const double best = column_max(t, c, any);
        if (!any) continue;
        for (auto& r : t.rows)
            if (r.cells[c].value && *r.cells[c].value == best) r.cells[c].bold = true;
    }
}

ReportCell cell(std::optional<double> v, int precision) {
    ReportCell c;
    c.value = v;
    c.precision = precision;
    return c;
}

std::string display_value(const ReportCell& c) {
    if (!c.value) return std::string(kMissing);
    if (c.p_value && *c.value < 0.001) return "<0.001";
    return fmt::format("{:.{}f}", *c.value, c.precision);
}

std::string escape_md(std::string_view s) {
    std::string out;
    for (char ch : s) {
        if (ch == '|' || ch == '*' || ch == '_') out.push_back('\\');
        out.push_back(ch);
    }
    return out;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

void emit_markdown(const ReportTable& t, std::ostream& out) {
    out << "### " << t.title << "\n\n";
    out << "| " << escape_md(t.row_header);
    for (const auto& c : t.columns) out << " | " << escape_md(c);
    out << " |\n|---";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << "|---:";
    out << "|\n";
    for (const auto& r : t.rows) {
        out << "| " << escape_md(r.label);
        for (const auto& c : r.cells) {
            std::string v = display_value(c);
            if (c.bold && c.value) v = "**" + v + "**";
            out << " | " << v << escape_md(c.annotation);
        }
        out << " |\n";
    }
    if (!t.footer.empty()) {
        out << "\n";
        for (const auto& f : t.footer) out << "- " << f << "\n";
    }
}

void emit_csv(const ReportTable& t, std::ostream& out) {
    out << csv_field(t.row_header);
    for (const auto& c : t.columns) out << ',' << csv_field(c);
    out << '\n';
    for (const auto& r : t.rows) {
        out << csv_field(r.label);
        for (const auto& c : r.cells) {
            out << ',';
            // Shortest representation that parses back to the same double.
            if (c.value) out << fmt::format("{}", *c.value);
        }
        out << '\n';
    }
}

json cell_json(const ReportCell& c) {
    return {{"value", c.value ? json(*c.value) : json(nullptr)},
            {"precision", c.precision},
            {"significant", c.significant},
            {"bold", c.bold},
            {"annotation", c.annotation},
            {"p_value", c.p_value}};
}

}  // namespace

void ReportTable::validate() const {
    for (const auto& r : rows)
        if (r.cells.size() != columns.size())
            throw DataError(fmt::format("table {}: row \"{}\" has {} cells for {} columns", name, r.label,
                                        r.cells.size(), columns.size()));
    for (auto c : maxima_columns)
        if (c >= columns.size()) throw DataError(fmt::format("table {}: maxima column {} out of range", name, c));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const bool maxima = std::find(maxima_columns.begin(), maxima_columns.end(), c) != maxima_columns.end();
        bool any = false;
        const double best = column_max(*this, c, any);
        for (const auto& r : rows) {
            const auto& cell = r.cells[c];
            if (!cell.bold || cell.significant) continue;
            if (!(maxima && cell.value && *cell.value == best))
                throw DataError(fmt::format("table {}: bold cell in row \"{}\", column \"{}\" is neither significant "
                                            "nor a column maximum",
                                            name, r.label, columns[c]));
        }
    }
}

json ReportTable::to_json() const {
    json rj = json::array();
    for (const auto& r : rows) {
        json cells = json::array();
        for (const auto& c : r.cells) cells.push_back(cell_json(c));
        rj.push_back({{"label", r.label}, {"cells", cells}});
    }
    return {{"name", name},       {"title", title},   {"row_header", row_header},
            {"columns", columns}, {"rows", rj},       {"footer", footer},
            {"maxima_columns", maxima_columns}};
}

ReportTable ReportTable::from_json(const json& j) {
    try {
        ReportTable t;
        t.name = j.at("name").get<std::string>();
        t.title = j.at("title").get<std::string>();
        t.row_header = j.at("row_header").get<std::string>();
        t.columns = j.at("columns").get<std::vector<std::string>>();
        t.footer = j.at("footer").get<std::vector<std::string>>();
        t.maxima_columns = j.at("maxima_columns").get<std::vector<std::size_t>>();
        for (const auto& rj : j.at("rows")) {
            ReportRow r;
            r.label = rj.at("label").get<std::string>();
            for (const auto& cj : rj.at("cells")) {
                ReportCell c;
                if (!cj.at("value").is_null()) c.value = cj["value"].get<double>();
                c.precision = cj.at("precision").get<int>();
                c.significant = cj.at("significant").get<bool>();
                c.bold = cj.at("bold").get<bool>();
                c.annotation = cj.at("annotation").get<std::string>();
                c.p_value = cj.at("p_value").get<bool>();
                r.cells.push_back(std::move(c));
            }
            t.rows.push_back(std::move(r));
        }
        return t;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("malformed report table: {}", e.what()));
    }
}

std::string_view extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::Markdown: return "md";
        case ReportFormat::Csv: return "csv";
        case ReportFormat::Json: return "json";
    }
    return "md";
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
    if (s == "md" || s == "markdown") return ReportFormat::Markdown;
    if (s == "csv") return ReportFormat::Csv;
    if (s == "json") return ReportFormat::Json;
    return std::nullopt;
}

void emit(const ReportTable& table, ReportFormat format, std::ostream& out) {
    table.validate();
    switch (format) {
        case ReportFormat::Markdown: emit_markdown(table, out); break;
        case ReportFormat::Csv: emit_csv(table, out); break;
        case ReportFormat::Json: out << table.to_json().dump(2) << '\n'; break;
    }
    out.flush();
    if (!out) throw DataError(fmt::format("failed to write table {}", table.name));
}

std::string render(const ReportTable& table, ReportFormat format) {
    std::ostringstream out;
    emit(table, format, out);
    return out.str();
}

std::vector<std::string> ReportNotes::lines() const {
    std::vector<std::string> out;
    out.push_back(fmt::format("BLEU: max_n={}, smoothing={}", metrics.bleu.max_n, metrics.bleu.smoothing ? "on" : "off"));
    out.push_back(fmt::format("chrF: max_n={}, beta={}", metrics.chrf.max_n, metrics.chrf.beta));
    if (!tokenizer.empty()) out.push_back("Tokenizer: " + tokenizer);
    if (!tagger.empty()) out.push_back("POS tagger: " + tagger);
    return out;
}

ReportTable similarity_table(const std::map<TransformationKind, SimilarityScore>& scores,
                             TransformationKind reference, const ReportNotes& notes) {
    ReportTable t;
    t.name = "similarity";
    t.title = fmt::format("Mean similarity to {}", display_name(reference));
    t.columns = {"Step", "chrF", "BLEU", "Cosine"};
    std::vector<std::string> missing;
    for (auto k : kSimilarityKinds) {
        auto it = scores.find(k);
        if (it == scores.end()) {
            missing.emplace_back(display_name(k));
            continue;
        }
        t.rows.push_back({std::string(display_name(k)),
                          {cell(pipeline_step(k), 0), cell(it->second.chrf, 2), cell(it->second.bleu, 2),
                           cell(it->second.cosine, 2)}});
    }
    t.footer.push_back(fmt::format("Reference corpus: {}", display_name(reference)));
    if (!missing.empty()) t.footer.push_back(fmt::format("Not computed: {}", fmt::join(missing, ", ")));
    for (auto& l : notes.lines()) t.footer.push_back(std::move(l));
    return t;
}

SignificanceResult compare_runs(const std::vector<ClassificationRun>& baseline,
                                const std::vector<ClassificationRun>& candidate) {
    if (baseline.size() != candidate.size())
        throw DataError(fmt::format("unpaired runs: {} baseline runs vs {} candidate runs", baseline.size(),
                                    candidate.size()));
    if (baseline.empty()) throw DataError("no runs to compare");
    std::vector<double> a, b;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        if (baseline[i].seed != candidate[i].seed)
            throw DataError(fmt::format("unpaired runs: run {} has seed {} vs {}", i, baseline[i].seed,
                                        candidate[i].seed));
        a.push_back(baseline[i].macro_f1);
        b.push_back(candidate[i].macro_f1);
    }
    SignificanceResult r;
    r.improves = mean(b) > mean(a);
    if (a == b) {
        r.p_value = 1.0;
        r.method = "identical";
        return r;
    }
    const auto w = wilcoxon_signed_rank(b, a);
    r.p_value = w.p_value;
    r.method = std::string(to_string(w.method));
    return r;
}

namespace {

std::string stars(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return {};
}

double mean_of(const std::vector<ClassificationRun>& runs, double ClassificationRun::*field) {
    if (runs.empty()) throw DataError("no runs for a classification row");
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return s / static_cast<double>(runs.size());
}

}  // namespace

ReportTable classification_table(const std::map<TransformationKind, std::vector<ClassificationRun>>& runs,
                                 TransformationKind baseline, const ReportNotes& notes, std::string name) {
    auto base = runs.find(baseline);
    if (base == runs.end())
        throw DataError(fmt::format("classification table: no runs for baseline {}", to_string(baseline)));
    ReportTable t;
    t.name = std::move(name);
    t.title = fmt::format("Mean classification metrics across {} runs", base->second.size());
    t.columns = {"Step", "macro-F1", "Acc AD", "Acc C", "p vs baseline"};
    t.maxima_columns = {1, 2, 3};
    std::size_t degenerate = 0;
    for (auto k : kAllKinds) {
        auto it = runs.find(k);
        if (it == runs.end()) continue;
        ReportRow row{std::string(display_name(k)),
                      {cell(pipeline_step(k), 0), cell(mean_of(it->second, &ClassificationRun::macro_f1), 3),
                       cell(mean_of(it->second, &ClassificationRun::acc_ad), 3),
                       cell(mean_of(it->second, &ClassificationRun::acc_c), 3), cell(std::nullopt, 3)}};
        row.cells[4].p_value = true;
        if (k != baseline) {
            const auto sig = compare_runs(base->second, it->second);
            row.cells[4].value = sig.p_value;
            if (sig.improves && sig.p_value < 0.05) {
                row.cells[1].significant = true;
                row.cells[1].annotation = stars(sig.p_value);
            }
        }
        for (const auto& r : it->second) degenerate += r.degenerate;
        t.rows.push_back(std::move(row));
    }
    bold_maxima(t);
    t.footer.push_back(fmt::format("Baseline: {}; p from a paired Wilcoxon signed-rank test on per-seed macro-F1; "
                                   "* p < 0.05, ** p < 0.01 (improvements only)",
                                   display_name(baseline)));
    if (degenerate > 0)
        t.footer.push_back(fmt::format("{} runs predicted a single class in at least one fold", degenerate));
    t.footer.emplace_back(kClassifierNote);
    for (auto& l : notes.lines()) t.footer.push_back(std::move(l));
    return t;
}

ReportTable back_translation_table(const std::map<TransformationKind, std::vector<ClassificationRun>>& runs,
                                   std::string_view source_language, const ReportNotes& notes) {
    ReportTable t;
    t.name = "back_translation";
    t.title = "Back-translation classification comparison";
    t.row_header = "Data Transformation";
    t.columns = {"macro-F1", "Acc AD", "Acc C"};
    t.maxima_columns = {0, 1, 2};
    const std::pair<TransformationKind, std::string> rows[] = {
        {TransformationKind::Original, fmt::format("Original ({})", source_language)},
        {TransformationKind::Translated, "Translated English"},
        {TransformationKind::BackTranslated, fmt::format("Back Translated ({})", source_language)}};
    for (const auto& [k, label] : rows) {
        auto it = runs.find(k);
        if (it == runs.end()) {
            t.footer.push_back(fmt::format("Not computed: {}", label));
            continue;
        }
        t.rows.push_back({label,
                          {cell(mean_of(it->second, &ClassificationRun::macro_f1), 3),
                           cell(mean_of(it->second, &ClassificationRun::acc_ad), 3),
                           cell(mean_of(it->second, &ClassificationRun::acc_c), 3)}});
    }
    bold_maxima(t);
    t.footer.emplace_back(kClassifierNote);
    for (auto& l : notes.lines()) t.footer.push_back(std::move(l));
    return t;
}

ReportTable group_measure_table(std::string name, std::string title, const std::vector<std::string>& measures,
                                const MeasureComparisons& comparisons, const ReportNotes& notes,
                                const MeasureReasons& reasons) {
    ReportTable t;
    t.name = std::move(name);
    t.title = std::move(title);
    for (const auto& m : measures) {
        t.columns.push_back(m + " C");
        t.columns.push_back(m + " AD");
        t.columns.push_back(m + " p");
    }
    std::vector<std::string> notes_out;
    for (auto k : kAllKinds) {
        auto it = comparisons.find(k);
        if (it == comparisons.end()) continue;
        ReportRow row{std::string(display_name(k)), {}};
        for (const auto& m : measures) {
            auto mc = it->second.find(m);
            const std::optional<GroupComparison>* cmp = mc == it->second.end() ? nullptr : &mc->second;
            if (!cmp || !*cmp) {
                row.cells.push_back(cell(std::nullopt, 3));
                row.cells.push_back(cell(std::nullopt, 3));
                row.cells.push_back(cell(std::nullopt, 3));
                row.cells.back().p_value = true;
                std::string why = "no comparison available";
                if (auto rk = reasons.find(k); rk != reasons.end())
                    if (auto rm = rk->second.find(m); rm != rk->second.end()) why = rm->second;
                notes_out.push_back(fmt::format("{} / {}: not computable ({})", display_name(k), m, why));
                continue;
            }
            const auto& g = **cmp;
            const bool sig = g.p_value < 0.05;
            for (double v : {g.mean_control, g.mean_ad, g.p_value}) {
                ReportCell c = cell(v, 3);
                c.significant = sig;
                c.bold = sig;
                row.cells.push_back(c);
            }
            row.cells.back().p_value = true;
            if (g.excluded > 0)
                notes_out.push_back(fmt::format("{} / {}: {} documents excluded (measure undefined)",
                                                display_name(k), m, g.excluded));
        }
        t.rows.push_back(std::move(row));
    }
    t.footer.push_back("Group means (C, AD) with Welch's t-test p; bold where p < 0.05");
    for (auto& n : notes_out) t.footer.push_back(std::move(n));
    for (auto& l : notes.lines()) t.footer.push_back(std::move(l));
    return t;
}

ReportTable dataset_table(const std::vector<std::pair<std::string, DatasetStats>>& datasets,
                          const std::string& tokenizer) {
    ReportTable t;
    t.name = "datasets";
    t.title = "Dataset sizes and transcript lengths (tokens)";
    t.row_header = "Dataset";
    t.columns = {"AD", "Control", "Total", "Length AD", "sd AD", "Length Control", "sd Control"};
    for (const auto& [name, s] : datasets) {
        auto sd = [](const GroupStats& g) { return g.degenerate ? std::optional<double>() : g.std_tokens; };
        t.rows.push_back({name,
                          {cell(static_cast<double>(s.ad.count), 0), cell(static_cast<double>(s.control.count), 0),
                           cell(static_cast<double>(s.total()), 0), cell(s.ad.mean_tokens, 0), cell(sd(s.ad), 0),
                           cell(s.control.mean_tokens, 0), cell(sd(s.control), 0)}});
        if (s.ad.degenerate || s.control.degenerate)
            t.footer.push_back(fmt::format("{}: sd undefined for groups with fewer than two transcripts", name));
    }
    t.footer.push_back("Tokenizer: " + tokenizer);
    return t;
}

void write_matrix_csv(const PairwiseMatrix& m, std::ostream& out) {
    out << "reference\\candidate";
    for (auto k : m.labels) out << ',' << to_string(k);
    out << '\n';
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        out << to_string(m.labels[i]);
        for (double v : m.values[i]) out << ',' << fmt::format("{}", v);
        out << '\n';
    }
    if (!out) throw DataError(fmt::format("failed to write {} matrix", to_string(m.metric)));
}

}  // namespace semform
