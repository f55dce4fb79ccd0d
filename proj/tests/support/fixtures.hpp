#pragma once

// Synthetic inputs shared across the test suites.

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modefuse/backend.hpp"
#include "modefuse/core.hpp"

namespace fixtures {

// A unique scratch directory per call; never reused within a process.
inline std::filesystem::path fresh_dir(const std::string& stem) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("modefuse_" + stem + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline modefuse::Question make_question(int i, std::optional<int> truth) {
    modefuse::Question q;
    char uid[16];
    std::snprintf(uid, sizeof(uid), "q%03d", i);
    q.q_uid = uid;
    q.question_text = "What does C do in segment " + std::to_string(i) + "?";
    for (int c = 0; c < modefuse::kOptionCount; ++c) {
        q.options[static_cast<std::size_t>(c)] =
            "activity " + std::to_string(i) + "-" + std::to_string(c);
    }
    q.video_ref = "videos/" + q.q_uid + ".mp4";
    q.ground_truth = truth;
    return q;
}

// n questions q000..q(n-1), truths i % 5 when labeled.
inline modefuse::QuestionSet synth_questions(int n, bool labeled = true) {
    std::vector<modefuse::Question> records;
    records.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        records.push_back(make_question(i, labeled ? std::optional<int>(i % 5) : std::nullopt));
    }
    return modefuse::validate_question_set(std::move(records));
}

inline modefuse::PredictionSet preds_of(std::string mode_id,
                                        std::map<std::string, int> answers) {
    modefuse::PredictionSet p;
    p.mode_id = std::move(mode_id);
    p.answers = std::move(answers);
    return p;
}

inline modefuse::BackendProfile mock_profile(
    std::string backend_id, std::uint64_t seed,
    std::map<std::string, modefuse::MockAction> script = {}) {
    modefuse::BackendProfile p;
    p.backend_id = std::move(backend_id);
    p.kind = modefuse::BackendKind::mock;
    p.model = "mock-vlm";
    p.seed = seed;
    p.script = std::move(script);
    return p;
}

// Three 0.8-accuracy modes over 10 questions (truths i % 5) that err on
// disjoint pairs, so every pairwise similarity is 0.6 and all three fuse to
// 1.0. Pairs tie on the disagreements and the lowest-index rule then lands
// on the truth often enough for {A,B} and {B,C} to reach 0.9, {A,C} 0.8.
inline std::vector<modefuse::PredictionSet> complementary_trio(
    const modefuse::QuestionSet& qs) {
    std::map<std::string, int> a, b, c;
    for (const auto& q : qs.questions()) {
        const int t = *q.ground_truth;
        const int i = std::stoi(q.q_uid.substr(1));
        a[q.q_uid] = (i == 8 || i == 9) ? (t + 1) % 5 : t;
        b[q.q_uid] = (i == 6 || i == 7) ? (t + 2) % 5 : t;
        c[q.q_uid] = (i == 4 || i == 5) ? (t + 3) % 5 : t;
    }
    return {preds_of("A", a), preds_of("B", b), preds_of("C", c)};
}

}  // namespace fixtures
