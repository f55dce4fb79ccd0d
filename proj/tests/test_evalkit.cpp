#include <doctest/doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <utility>

#include <nlohmann/json.hpp>

#include "modefuse/evalkit.hpp"
#include "support/fixtures.hpp"

using namespace modefuse;
using nlohmann::json;

TEST_SUITE("evalkit") {

TEST_CASE("accuracy equals the voting weight by construction") {
    QuestionSet qs = fixtures::synth_questions(10);
    auto trio = fixtures::complementary_trio(qs);
    for (const auto& p : trio) {
        CHECK(accuracy(p, qs) == compute_weight(p, qs).w);
    }
    CHECK(accuracy(trio[0], qs) == 0.8);
}

TEST_CASE("percent formatting rounds to one decimal") {
    CHECK(format_percent(0.759) == "75.9%");
    CHECK(format_percent(0.79) == "79.0%");
    CHECK(format_percent(1.0) == "100.0%");
    CHECK(format_percent(0.0) == "0.0%");
    CHECK(format_percent(2.0 / 3.0) == "66.7%");
    CHECK(format_percent(0.0004) == "0.0%");
}

TEST_CASE("similarity reports render percentages and survive missing pairs") {
    auto preds = std::vector<PredictionSet>{
        fixtures::preds_of("alpha", {{"q1", 0}, {"q2", 1}, {"q3", 2}}),
        fixtures::preds_of("beta", {{"q1", 0}, {"q2", 2}, {"q3", 2}}),
        fixtures::preds_of("gamma", {{"q9", 4}}),
    };
    SimilarityReport rep = similarity_report(preds);

    CHECK(rep.matrix.at("alpha", "beta") == 2.0 / 3.0);
    CHECK(rep.table.find("alpha") != std::string::npos);
    CHECK(rep.table.find("66.7%") != std::string::npos);
    CHECK(rep.table.find("100.0%") != std::string::npos);  // diagonal
    CHECK(rep.table.find("n/a") != std::string::npos);     // alpha/gamma

    CHECK(rep.machine["mode_ids"][0] == "alpha");
    CHECK(rep.machine["sim"][0][2].is_null());
    CHECK(rep.machine["sim"][0][1] == 2.0 / 3.0);

    CHECK_THROWS_AS(similarity_report({preds[0]}), ValidationError);
}

TEST_CASE("activation sweeps evaluate every requested subset") {
    QuestionSet qs = fixtures::synth_questions(10);
    auto trio = fixtures::complementary_trio(qs);

    SweepTable t = activation_sweep(all_activations(3), trio, qs);
    REQUIRE(t.rows.size() == 7);
    CHECK(t.candidate_ids == std::vector<std::string>{"A", "B", "C"});

    // Sorted by accuracy descending: the full trio (1.0) leads.
    CHECK(t.rows[0].activation == std::vector<int>{1, 1, 1});
    CHECK(t.rows[0].accuracy == 1.0);
    CHECK(t.rows[0].evaluated == 10);
    CHECK(t.rows[0].mode_ids == std::vector<std::string>{"A", "B", "C"});

    // Frozen accuracies for the complementary trio (ties keep binary order).
    std::map<std::string, double> by_key;
    for (const auto& row : t.rows) {
        std::string key;
        for (int b : row.activation) key += static_cast<char>('0' + b);
        by_key[key] = row.accuracy;
    }
    CHECK(by_key.at("100") == 0.8);  // A
    CHECK(by_key.at("010") == 0.8);  // B
    CHECK(by_key.at("001") == 0.8);  // C
    CHECK(by_key.at("110") == 0.9);  // A+B
    CHECK(by_key.at("101") == 0.8);  // A+C
    CHECK(by_key.at("011") == 0.9);  // B+C
    CHECK(by_key.at("111") == 1.0);

    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        CHECK(t.rows[i - 1].accuracy >= t.rows[i].accuracy);
    }

    const std::string text = t.table();
    CHECK(text.find("activation") != std::string::npos);
    CHECK(text.find("111") != std::string::npos);
    CHECK(text.find("100.0%") != std::string::npos);

    json j = t.to_json();
    CHECK(j["rows"].size() == 7);
    CHECK(j["candidates"].size() == 3);
}

TEST_CASE("sweep input validation") {
    QuestionSet qs = fixtures::synth_questions(10);
    auto trio = fixtures::complementary_trio(qs);

    CHECK_THROWS_AS(activation_sweep({{1, 1}}, trio, qs), ValidationError);
    CHECK_THROWS_AS(activation_sweep({{0, 0, 0}}, trio, qs), ValidationError);
    CHECK_THROWS_AS(activation_sweep({{1, 2, 0}}, trio, qs), ValidationError);
}

TEST_CASE("all_activations enumerates every nonempty subset in binary order") {
    auto a1 = all_activations(1);
    REQUIRE(a1.size() == 1);
    CHECK(a1[0] == std::vector<int>{1});

    auto a3 = all_activations(3);
    REQUIRE(a3.size() == 7);
    CHECK(a3[0] == std::vector<int>{0, 0, 1});
    CHECK(a3[1] == std::vector<int>{0, 1, 0});
    CHECK(a3[6] == std::vector<int>{1, 1, 1});

    CHECK_THROWS_AS(all_activations(0), ValidationError);
    CHECK_THROWS_AS(all_activations(21), ValidationError);
}

TEST_CASE("submissions cover the question set and round-trip") {
    QuestionSet qs = fixtures::synth_questions(10);
    auto trio = fixtures::complementary_trio(qs);
    EnsembleSpec spec = make_ensemble_spec(trio, qs, {"A", "B", "C"});
    auto decisions = fuse(spec, trio);

    auto dir = fixtures::fresh_dir("subm");
    const auto out = dir / "submission.json";
    write_submission(decisions, qs, out);

    auto back = read_submission(out);
    REQUIRE(back.size() == 10);
    for (const auto& q : qs.questions()) {
        CHECK(back.at(q.q_uid) == decisions.at(q.q_uid).r);
        CHECK(back.at(q.q_uid) == *q.ground_truth);  // trio fuses perfectly
    }

    // The sibling CSV matches, line for line.
    std::ifstream csv(dir / "submission.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "q_uid,answer");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        CHECK(back.at(line.substr(0, comma)) == std::stoi(line.substr(comma + 1)));
        ++rows;
    }
    CHECK(rows == 10);
}

TEST_CASE("coverage-checked submissions reject gaps") {
    QuestionSet qs = fixtures::synth_questions(3);
    PredictionSet p = fixtures::preds_of("m", {{"q000", 0}, {"q001", 1}});  // q002 missing
    EnsembleSpec spec = make_ensemble_spec({p}, qs, {"m"});
    auto decisions = fuse(spec, {p});

    auto dir = fixtures::fresh_dir("subm");
    CHECK_THROWS_WITH_AS(write_submission(decisions, qs, dir / "s.json"),
                         doctest::Contains("q002"), ValidationError);

    // The unchecked overload happily writes what it was given.
    CHECK_NOTHROW(write_submission(decisions, dir / "partial.json"));
    CHECK(read_submission(dir / "partial.json").size() == 2);
}

TEST_CASE("submission files are deterministic bytes") {
    QuestionSet qs = fixtures::synth_questions(5);
    PredictionSet p = fixtures::preds_of(
        "m", {{"q000", 0}, {"q001", 1}, {"q002", 2}, {"q003", 3}, {"q004", 4}});
    EnsembleSpec spec = make_ensemble_spec({p}, qs, {"m"});
    auto decisions = fuse(spec, {p});

    auto dir = fixtures::fresh_dir("subm");
    write_submission(decisions, qs, dir / "a.json");
    write_submission(decisions, qs, dir / "b.json");

    auto slurp = [](const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(!slurp(dir / "a.json").empty());
}

TEST_CASE("submission reading validates shape") {
    auto dir = fixtures::fresh_dir("subm");
    const auto bad = dir / "bad.json";
    std::ofstream(bad) << "[1, 2, 3]";
    CHECK_THROWS_AS(read_submission(bad), ValidationError);
    CHECK_THROWS_AS(read_submission(dir / "absent.json"), IoError);
}

TEST_CASE("large submissions write quickly") {
    constexpr int kCount = 5000;
    QuestionSet qs = fixtures::synth_questions(kCount);
    std::map<std::string, int> answers;
    for (int i = 0; i < kCount; ++i) {
        char uid[16];
        std::snprintf(uid, sizeof(uid), "q%03d", i);
        answers.emplace(uid, i % 5);
    }
    PredictionSet p = fixtures::preds_of("m", std::move(answers));
    EnsembleSpec spec = make_ensemble_spec({p}, qs, {"m"});
    auto decisions = fuse(spec, {p});
    REQUIRE(decisions.size() == kCount);

    auto dir = fixtures::fresh_dir("subm_big");
    const auto start = std::chrono::steady_clock::now();
    write_submission(decisions, qs, dir / "big.json");
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;

    CHECK(elapsed.count() < 1.0);
    CHECK(read_submission(dir / "big.json").size() == kCount);
}

}  // TEST_SUITE
