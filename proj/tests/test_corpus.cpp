#include <doctest.h>

#include <set>
#include <sstream>

#include "semform/corpus.hpp"
#include "semform/error.hpp"
#include "semform/lexstats.hpp"
#include "support.hpp"

using namespace semform;
namespace st = semform::testing;

namespace {

Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return parse_jsonl(in, "inline");
}

Dataset synthetic(std::size_t ad, std::size_t control) {
    Dataset d;
    d.name = "synthetic";
    d.source_language = "en";
    for (std::size_t i = 0; i < ad + control; ++i)
        d.transcripts.push_back({"id" + std::to_string(i), "text " + std::to_string(i),
                                 i < ad ? Group::AD : Group::Control, std::nullopt, "en"});
    return d;
}

std::string error_of(const std::string& text) {
    try {
        parse(text);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("three-row jsonl parses with its groups") {
    const auto d = parse(R"({"id":"a","text":"the boy","group":"AD","language":"en"}
{"id":"b","text":"the dog","group":"C","language":"en"}
{"id":"c","text":"a cat","group":"Control","language":"en"}
)");
    REQUIRE(d.size() == 3);
    CHECK(d.transcripts[0].group == Group::AD);
    CHECK(d.transcripts[1].group == Group::Control);
    CHECK(d.transcripts[2].group == Group::Control);
    CHECK(d.source_language == "en");
}

TEST_CASE("load errors name the row") {
    CHECK(error_of(R"({"id":"a","text":"x","group":"AD","language":"en"}
{"id":"b","text":"y","group":"MCI","language":"en"})")
              .find("row 2") != std::string::npos);
    CHECK(error_of(R"({"id":"a","text":"x","group":"MCI","language":"en"})").find("MCI") != std::string::npos);
    CHECK(error_of(R"({"id":"a","group":"AD","language":"en"})").find("text") != std::string::npos);
    CHECK(error_of(R"({"id":"a","text":"x","group":"AD","language":"en"}
{"id":"a","text":"y","group":"C","language":"en"})")
              .find("duplicate") != std::string::npos);
    CHECK(error_of(R"({"id":"a","text":"  ","group":"AD","language":"en"})").find("empty text") != std::string::npos);
    CHECK(error_of(R"({"id":"a","text":"x","group":"AD","language":"english!"})").find("language") !=
          std::string::npos);
}

TEST_CASE("csv and jsonl load the same transcripts") {
    const auto d = load_dataset(st::fixture("english40.jsonl"), DatasetFormat::Jsonl);
    std::ostringstream csv;
    write_csv(d, csv);
    std::istringstream in(csv.str());
    const auto back = parse_csv(in, d.name);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.transcripts[i].id == d.transcripts[i].id);
        CHECK(back.transcripts[i].text == d.transcripts[i].text);
        CHECK(back.transcripts[i].group == d.transcripts[i].group);
        CHECK(back.transcripts[i].split == d.transcripts[i].split);
    }
}

TEST_CASE("quoted csv fields may hold commas, quotes and newlines") {
    std::istringstream in("id,text,group,language\r\nx1,\"one, \"\"two\"\"\nthree\",AD,en\r\n");
    const auto d = parse_csv(in, "q");
    REQUIRE(d.size() == 1);
    CHECK(d.transcripts[0].text == "one, \"two\"\nthree");
}

TEST_CASE("jsonl write and reload is byte-stable") {
    const auto d = load_dataset(st::fixture("bilingual40.jsonl"), DatasetFormat::Jsonl);
    std::ostringstream first;
    write_jsonl(d, first);
    std::istringstream in(first.str());
    const auto again = parse_jsonl(in, d.name);
    std::ostringstream second;
    write_jsonl(again, second);
    CHECK(first.str() == second.str());
}

TEST_CASE("dataset stats") {
    const Tokenizer tok;
    SUBCASE("mean and n-1 std") {
        const auto d = parse(R"({"id":"a","text":"one two three","group":"AD","language":"en"}
{"id":"b","text":"one two three four five","group":"AD","language":"en"}
{"id":"c","text":"solo","group":"C","language":"en"})");
        const auto s = dataset_stats(d, tok);
        CHECK(s.ad.count == 2);
        CHECK(s.ad.mean_tokens == doctest::Approx(4.0));
        CHECK(s.ad.std_tokens == doctest::Approx(1.41421356).epsilon(1e-6));
        CHECK_FALSE(s.ad.degenerate);
        CHECK(s.control.count == 1);
        CHECK(s.control.std_tokens == 0.0);
        CHECK(s.control.degenerate);
    }
    SUBCASE("count fixtures") {
        const auto dog = load_dataset(st::fixture("dogstory_counts139.jsonl"), DatasetFormat::Jsonl);
        const auto a = dataset_stats(dog, tok);
        CHECK(a.ad.count == 23);
        CHECK(a.control.count == 116);
        CHECK(a.total() == 139);
        const auto bal = load_dataset(st::fixture("balanced156.jsonl"), DatasetFormat::Jsonl);
        const auto b = dataset_stats(bal, tok);
        CHECK(b.ad.count == 78);
        CHECK(b.control.count == 78);
    }
    SUBCASE("empty dataset") { CHECK_THROWS_AS(dataset_stats(Dataset{}, tok), DataError); }
}

TEST_CASE("stratified folds") {
    SUBCASE("139 items, k=5") {
        const auto d = synthetic(23, 116);
        const auto f = split_folds(d, 5, 7);
        std::multiset<std::size_t> sizes;
        for (int i = 0; i < 5; ++i) {
            sizes.insert(f.fold_size(i));
            std::size_t ad = 0;
            for (const auto& id : f.members(i)) ad += d.find(id)->group == Group::AD;
            CHECK((ad == 4 || ad == 5));
        }
        CHECK(sizes == std::multiset<std::size_t>{27, 28, 28, 28, 28});
    }
    SUBCASE("k=2 on four balanced items") {
        const auto d = synthetic(2, 2);
        const auto f = split_folds(d, 2, 1);
        for (int i = 0; i < 2; ++i) {
            const auto m = f.members(i);
            REQUIRE(m.size() == 2);
            CHECK(d.find(m[0])->group != d.find(m[1])->group);
        }
    }
    SUBCASE("determinism and seed dependence") {
        const auto d = synthetic(20, 40);
        CHECK(split_folds(d, 5, 3) == split_folds(d, 5, 3));
        CHECK_FALSE(split_folds(d, 5, 3) == split_folds(d, 5, 4));
    }
    SUBCASE("group smaller than k") { CHECK_THROWS_AS(split_folds(synthetic(3, 10), 5, 0), DataError); }
    SUBCASE("every id assigned once") {
        const auto d = synthetic(13, 29);
        const auto f = split_folds(d, 4, 11);
        CHECK(f.fold_of.size() == d.size());
        std::size_t total = 0;
        for (int i = 0; i < 4; ++i) total += f.fold_size(i);
        CHECK(total == d.size());
    }
}

TEST_CASE("fixed split") {
    auto d = synthetic(5, 5);
    for (std::size_t i = 0; i < d.size(); ++i) d.transcripts[i].split = (i % 10 < 7) ? Split::Train : Split::Test;
    SUBCASE("7 / 3") {
        const auto [train, test] = fixed_split(d);
        CHECK(train.size() == 7);
        CHECK(test.size() == 3);
        CHECK(train.transcripts.front().id == "id0");
    }
    SUBCASE("untagged row names its id") {
        d.transcripts[4].split.reset();
        try {
            fixed_split(d);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("id4") != std::string::npos);
        }
    }
    SUBCASE("all train leaves test empty") {
        for (auto& t : d.transcripts) t.split = Split::Train;
        CHECK(fixed_split(d).second.empty());
    }
}
