// Acceptance gate: one self-contained check per release criterion, each
// printing a single [PASS]/[FAIL] line. Exit status is the failure count.
//
// The checks judge the engine against independent oracles (brute-force vote
// evaluator, hand-frozen fixture arithmetic, direct counting), never against
// the engine itself.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modefuse/backend.hpp"
#include "modefuse/cli.hpp"
#include "modefuse/ensemble.hpp"
#include "modefuse/evalkit.hpp"
#include "modefuse/formats.hpp"
#include "modefuse/pipeline.hpp"
#include "modefuse/prompt.hpp"
#include "support/corpus.hpp"
#include "support/fixtures.hpp"
#include "support/vote_oracle.hpp"

using namespace modefuse;
using nlohmann::json;

namespace {

// Failure text, empty for pass. Checks throw freely; the runner catches.
using Check = std::function<std::string()>;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing " + p.string() + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string uid_of(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "q%03d", i);
    return buf;
}

// A random vote problem seen from both sides: engine containers and the
// plain-container oracle view, built from one pass over the rng.
struct RandomInstance {
    std::vector<std::string> ids;
    std::vector<std::string> q_uids;
    oracle::Instance inst;
    std::vector<PredictionSet> preds;
    EnsembleSpec spec;
};

RandomInstance make_random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> mode_count(2, 7);
    std::uniform_int_distribution<int> question_count(5, 50);
    std::uniform_real_distribution<double> weight(0.01, 1.0);
    std::uniform_int_distribution<int> option(0, kOptionCount - 1);
    std::bernoulli_distribution answers(0.9);

    RandomInstance ri;
    const int n_modes = mode_count(rng);
    const int n_questions = question_count(rng);
    for (int q = 0; q < n_questions; ++q) ri.q_uids.push_back(uid_of(q));

    for (int k = 0; k < n_modes; ++k) {
        const std::string id = "mode" + std::to_string(k);
        std::map<std::string, int> ans;
        for (int q = 0; q < n_questions; ++q) {
            // Question 0 is always answered so every mode pair overlaps.
            if (q == 0 || answers(rng)) ans[ri.q_uids[static_cast<std::size_t>(q)]] = option(rng);
        }
        const double w = weight(rng);
        ri.ids.push_back(id);
        ri.inst.answers.push_back(ans);
        ri.inst.weights.push_back(w);
        PredictionSet p;
        p.mode_id = id;
        p.answers = std::move(ans);
        ri.preds.push_back(std::move(p));
        ri.spec.active.push_back(id);
        ri.spec.weights[id] = ModeWeight{id, w, 100};
    }
    ri.spec.similarity = build_similarity_matrix(ri.preds);
    return ri;
}

std::string check_vote_oracle_equivalence() {
    std::mt19937_64 rng(0x5eed0001);
    const auto sim_and_active = [](const RandomInstance& ri) {
        std::vector<int> active(ri.ids.size());
        std::iota(active.begin(), active.end(), 0);
        return active;
    };
    long checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const RandomInstance ri = make_random_instance(rng);
        const auto sim = oracle::similarity_matrix(ri.inst);
        const auto active = sim_and_active(ri);
        const auto decisions = fuse(ri.spec, ri.preds);

        std::size_t answered = 0;
        for (const auto& q : ri.q_uids) {
            const oracle::Decision want = oracle::vote(active, ri.inst, sim, q);
            const auto it = decisions.find(q);
            if (!want.answered) {
                if (it != decisions.end()) {
                    return "trial " + std::to_string(trial) + " " + q +
                           ": decided a question no mode answered";
                }
                continue;
            }
            ++answered;
            if (it == decisions.end()) {
                return "trial " + std::to_string(trial) + " " + q + ": no decision";
            }
            if (it->second.r != want.r || it->second.tie != want.tie) {
                return "trial " + std::to_string(trial) + " " + q + ": engine " +
                       std::to_string(it->second.r) + " oracle " + std::to_string(want.r);
            }
            for (int c = 0; c < kOptionCount; ++c) {
                if (it->second.scores[static_cast<std::size_t>(c)] !=
                    want.scores[static_cast<std::size_t>(c)]) {
                    return "trial " + std::to_string(trial) + " " + q + ": score " +
                           std::to_string(c) + " differs";
                }
            }
            ++checked;
        }
        if (decisions.size() != answered) {
            return "trial " + std::to_string(trial) + ": decision count " +
                   std::to_string(decisions.size()) + " != " + std::to_string(answered);
        }
    }
    if (checked < 10000) return "only " + std::to_string(checked) + " questions checked";
    return {};
}

std::string check_weight_similarity_properties() {
    std::mt19937_64 rng(0x5eed0002);
    std::uniform_int_distribution<int> mode_count(2, 6);
    std::uniform_int_distribution<int> question_count(5, 30);
    std::uniform_int_distribution<int> option(0, kOptionCount - 1);
    std::bernoulli_distribution answers(0.85);

    for (int trial = 0; trial < 500; ++trial) {
        const int n_modes = mode_count(rng);
        const int n_questions = question_count(rng);
        const QuestionSet qs = fixtures::synth_questions(n_questions);

        // Same records fed in shuffled order must change nothing.
        std::vector<Question> shuffled = qs.questions();
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const QuestionSet qs_shuffled = validate_question_set(std::move(shuffled));

        std::vector<PredictionSet> preds;
        for (int k = 0; k < n_modes; ++k) {
            PredictionSet p;
            p.mode_id = "mode" + std::to_string(k);
            for (int q = 0; q < n_questions; ++q) {
                if (q == 0 || answers(rng)) p.answers[uid_of(q)] = option(rng);
            }
            preds.push_back(std::move(p));
        }

        for (const auto& p : preds) {
            const ModeWeight w = compute_weight(p, qs);
            if (!(w.w >= 0.0 && w.w <= 1.0)) return "weight out of range";
            int correct = 0;
            int graded = 0;
            for (const auto& [q_uid, a] : p.answers) {
                const auto truth = qs.truth_of(q_uid);
                if (!truth) continue;
                ++graded;
                if (a == *truth) ++correct;
            }
            if (w.n_eval != graded) return "n_eval differs from a direct count";
            if (w.w != static_cast<double>(correct) / static_cast<double>(graded)) {
                return "weight differs from a direct count";
            }
            const ModeWeight w2 = compute_weight(p, qs_shuffled);
            if (w2.w != w.w || w2.n_eval != w.n_eval) {
                return "weight changed under question permutation";
            }
        }

        const SimilarityMatrix m = build_similarity_matrix(preds);
        std::vector<PredictionSet> reordered = preds;
        std::shuffle(reordered.begin(), reordered.end(), rng);
        const SimilarityMatrix m2 = build_similarity_matrix(reordered);
        for (const auto& a : preds) {
            if (m.at(a.mode_id, a.mode_id) != 1.0) return "diagonal is not 1.0";
            for (const auto& b : preds) {
                if (!m.has(a.mode_id, b.mode_id)) return "missing cell despite overlap";
                const double s = m.at(a.mode_id, b.mode_id);
                if (!(s >= 0.0 && s <= 1.0)) return "similarity out of range";
                if (s != m.at(b.mode_id, a.mode_id)) return "matrix not symmetric";
                if (s != oracle::similarity(a.answers, b.answers)) {
                    return "similarity differs from a direct count";
                }
                if (s != m2.at(a.mode_id, b.mode_id)) {
                    return "similarity changed under mode permutation";
                }
            }
        }
    }
    return {};
}

std::string check_scaling_invariance() {
    std::mt19937_64 rng(0x5eed0003);
    std::uniform_real_distribution<double> scale(0.05, 8.0);
    for (int trial = 0; trial < 200; ++trial) {
        const RandomInstance ri = make_random_instance(rng);
        const auto base = fuse(ri.spec, ri.preds);
        for (int s = 0; s < 5; ++s) {
            const double c = scale(rng);
            EnsembleSpec scaled = ri.spec;
            for (auto& [id, w] : scaled.weights) w.w *= c;
            const auto got = fuse(scaled, ri.preds);
            if (got.size() != base.size()) {
                return "trial " + std::to_string(trial) + ": decision count changed";
            }
            for (const auto& [q, d] : base) {
                const auto it = got.find(q);
                if (it == got.end() || it->second.r != d.r) {
                    return "trial " + std::to_string(trial) + " " + q +
                           ": decision changed under scale " + std::to_string(c);
                }
            }
        }
    }
    return {};
}

std::string check_unanimity_and_identity() {
    std::mt19937_64 rng(0x5eed0004);
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    std::uniform_int_distribution<int> option(0, kOptionCount - 1);
    const int n_questions = 20;

    // Unanimity: for every ensemble size and every assignment tried, the
    // fused answer is the shared answer on every question.
    for (int n = 1; n <= 7; ++n) {
        std::vector<std::map<std::string, int>> assignments;
        for (int o = 0; o < kOptionCount; ++o) {
            std::map<std::string, int> a;
            for (int q = 0; q < n_questions; ++q) a[uid_of(q)] = o;
            assignments.push_back(std::move(a));
        }
        for (int extra = 0; extra < 3; ++extra) {
            std::map<std::string, int> a;
            for (int q = 0; q < n_questions; ++q) a[uid_of(q)] = option(rng);
            assignments.push_back(std::move(a));
        }
        for (const auto& assignment : assignments) {
            EnsembleSpec spec;
            std::vector<PredictionSet> preds;
            for (int k = 0; k < n; ++k) {
                PredictionSet p;
                p.mode_id = "mode" + std::to_string(k);
                p.answers = assignment;
                spec.active.push_back(p.mode_id);
                spec.weights[p.mode_id] = ModeWeight{p.mode_id, weight(rng), 100};
                preds.push_back(std::move(p));
            }
            spec.similarity = build_similarity_matrix(preds);
            const auto decisions = fuse(spec, preds);
            if (decisions.size() != assignment.size()) return "unanimity: missing decisions";
            for (const auto& [q, d] : decisions) {
                if (d.r != assignment.at(q)) return "unanimity broken on " + q;
                if (d.participants.size() != static_cast<std::size_t>(n)) {
                    return "unanimity: wrong participant count";
                }
            }
        }
    }

    // Single-mode identity: an ensemble of one reproduces that mode exactly,
    // abstentions included.
    std::bernoulli_distribution answers(0.8);
    for (int k = 0; k < 7; ++k) {
        PredictionSet p;
        p.mode_id = "solo" + std::to_string(k);
        for (int q = 0; q < n_questions; ++q) {
            if (q == k || answers(rng)) p.answers[uid_of(q)] = option(rng);
        }
        EnsembleSpec spec;
        spec.active = {p.mode_id};
        spec.weights[p.mode_id] = ModeWeight{p.mode_id, weight(rng), 100};
        spec.similarity = build_similarity_matrix({p});
        const auto decisions = fuse(spec, {p});
        if (decisions.size() != p.answers.size()) return "identity: decision count differs";
        for (const auto& [q, a] : p.answers) {
            const auto it = decisions.find(q);
            if (it == decisions.end() || it->second.r != a) return "identity broken on " + q;
            if (it->second.participants != std::vector<std::string>{p.mode_id}) {
                return "identity: wrong participants";
            }
        }
    }
    return {};
}

std::string check_seven_mode_fixture() {
    const std::filesystem::path path =
        std::filesystem::path(MODEFUSE_TEST_DATA_DIR) / "ensemble" / "seven_mode_weights.json";
    std::ifstream in(path);
    if (!in) return "fixture missing: " + path.string();
    const json fixture = json::parse(in);

    const auto ids = fixture.at("mode_ids").get<std::vector<std::string>>();
    const auto weights = fixture.at("weights").get<std::vector<double>>();
    const auto expected = fixture.at("expected_effective").get<std::vector<double>>();
    const int n_eval = fixture.at("n_eval").get<int>();
    if (ids.size() != 7 || weights.size() != 7 || expected.size() != 7) {
        return "fixture must hold exactly seven modes";
    }
    const double frozen[7] = {0.759, 0.737, 0.752, 0.740, 0.730, 0.744, 0.737};
    for (std::size_t i = 0; i < 7; ++i) {
        if (weights[i] != frozen[i]) return "fixture weight drifted at " + ids[i];
    }

    EnsembleSpec spec;
    spec.active = ids;
    SimilarityMatrix m(ids);
    const auto& sim = fixture.at("similarity");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        spec.weights[ids[i]] = ModeWeight{ids[i], weights[i], n_eval};
        for (std::size_t j = i; j < ids.size(); ++j) {
            m.set(ids[i], ids[j], sim.at(i).at(j).get<double>(), n_eval);
        }
    }
    spec.similarity = std::move(m);
    spec.validate();

    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double got = effective_weight(ids[i], spec);
        if (std::abs(got - expected[i]) > 1e-12) {
            return ids[i] + ": effective weight " + std::to_string(got) + " vs frozen " +
                   std::to_string(expected[i]);
        }
    }
    return {};
}

// The three-mode roster used by the end-to-end checks: both paradigms plus a
// focus variant, on two differently seeded deterministic backends.
std::vector<ModeConfig> e2e_modes() {
    ModeConfig one;
    one.mode_id = "m_one";
    one.paradigm = Paradigm::one_stage;
    one.prompt_style = PromptStyle::P1;
    one.cot_fields.reason = true;
    one.cot_fields.confidence = true;
    one.backend_id = "mock_a";

    ModeConfig two;
    two.mode_id = "m_two";
    two.paradigm = Paradigm::two_stage;
    two.prompt_style = PromptStyle::P2;
    two.cot_fields.caption = true;
    two.cot_fields.summary = true;
    two.backend_id = "mock_a";
    two.video_seconds = 20.0;

    ModeConfig foc;
    foc.mode_id = "m_foc";
    foc.paradigm = Paradigm::one_stage;
    foc.prompt_style = PromptStyle::P3;
    foc.backend_id = "mock_b";
    foc.focus_variant = FocusVariant::qa_focal;

    return {one, two, foc};
}

std::string check_end_to_end_determinism() {
    const QuestionSet qs = fixtures::synth_questions(20);
    const auto modes = e2e_modes();
    const auto dir = fixtures::fresh_dir("acc_e2e");

    std::string reference;
    int run_index = 0;
    for (int repeat = 0; repeat < 3; ++repeat) {
        for (int workers : {1, 4, 16}) {
            BackendRegistry registry({fixtures::mock_profile("mock_a", 11),
                                      fixtures::mock_profile("mock_b", 23)});
            RunOptions opts;
            opts.workers = workers;

            std::string stream;
            std::vector<PredictionSet> all_preds;
            for (const auto& mode : modes) {
                const ModeRunResult r = run_mode(mode, qs, registry, opts);
                stream += r.predictions.to_json().dump(2) + "\n";
                for (const auto& rec : r.records) stream += rec.to_json(true).dump() + "\n";
                all_preds.push_back(r.predictions);
            }

            const EnsembleSpec spec =
                make_ensemble_spec(all_preds, qs, {"m_one", "m_two", "m_foc"});
            const auto decisions = fuse(spec, all_preds);
            const auto sub = dir / ("submission_" + std::to_string(run_index) + ".json");
            write_submission(decisions, qs, sub);
            stream += slurp(sub);
            stream += spec.to_json().dump(2);

            if (run_index == 0) {
                reference = std::move(stream);
            } else if (stream != reference) {
                return "run " + std::to_string(run_index) + " (workers " +
                       std::to_string(workers) + ") differs from run 0";
            }
            ++run_index;
        }
    }
    return {};
}

std::string check_parser_corpus() {
    const auto fixtures_list =
        corpus::load(std::string(MODEFUSE_TEST_DATA_DIR) + "/parser_corpus");
    if (fixtures_list.size() < 25) {
        return "corpus holds only " + std::to_string(fixtures_list.size()) + " fixtures";
    }
    for (const auto& f : fixtures_list) {
        const std::string verdict = corpus::check(f);
        if (!verdict.empty()) return verdict;
    }
    return {};
}

std::string check_cache_short_circuit() {
    const auto dir = fixtures::fresh_dir("acc_cache");
    json cfg;
    cfg["backends"] = json::array(
        {json{{"backend_id", "mock_a"}, {"kind", "mock"}, {"model", "mock-vlm"}, {"seed", 11}},
         json{{"backend_id", "mock_b"}, {"kind", "mock"}, {"model", "mock-vlm"}, {"seed", 23}}});
    cfg["modes"] = json::array(
        {json{{"mode_id", "m_one"},
              {"paradigm", "one_stage"},
              {"prompt_style", "P1"},
              {"cot_fields", json::array({"reason", "answer", "confidence"})},
              {"backend_id", "mock_a"}},
         json{{"mode_id", "m_two"},
              {"paradigm", "two_stage"},
              {"prompt_style", "P2"},
              {"cot_fields", json::array({"caption", "summary", "answer"})},
              {"backend_id", "mock_a"},
              {"video_seconds", 20.0}},
         json{{"mode_id", "m_foc"},
              {"paradigm", "one_stage"},
              {"prompt_style", "P3"},
              {"cot_fields", json::array({"answer"})},
              {"backend_id", "mock_b"},
              {"focus_variant", "qa_focal"}}});
    cfg["cache_dir"] = "cache";
    write_text(dir / "config.json", cfg.dump(2) + "\n");
    write_text(dir / "questions.json",
               fixtures::synth_questions(10).to_json().dump(2) + "\n");

    const auto snapshot = [&](const std::filesystem::path& out_dir) {
        std::string s;
        for (const char* mode : {"m_one", "m_two", "m_foc"}) {
            s += slurp(out_dir / "predictions" / (std::string(mode) + ".json"));
            s += slurp(out_dir / "records" / (std::string(mode) + ".jsonl"));
        }
        return s;
    };
    const auto run_into = [&](const std::string& out_name) {
        std::ostringstream out, err;
        const int code = run_cli({"run", "--config", (dir / "config.json").string(),
                                  "--questions", (dir / "questions.json").string(), "--out",
                                  (dir / out_name).string()},
                                 out, err);
        if (code != 0) throw std::runtime_error("run exited " + std::to_string(code) + ": " +
                                                err.str());
    };

    run_into("out1");
    const std::string first = snapshot(dir / "out1");

    // Same command again: everything resumes, nothing reaches a backend.
    MockBackend::reset_total_calls();
    run_into("out1");
    if (MockBackend::total_calls() != 0) {
        return "identical rerun reached the backend " +
               std::to_string(MockBackend::total_calls()) + " times";
    }
    if (snapshot(dir / "out1") != first) return "identical rerun changed its outputs";

    // Fresh output directory: no checkpoints to resume from, so only the
    // response cache can keep the backends silent.
    MockBackend::reset_total_calls();
    run_into("out2");
    if (MockBackend::total_calls() != 0) {
        return "cached rerun reached the backend " +
               std::to_string(MockBackend::total_calls()) + " times";
    }
    if (snapshot(dir / "out2") != first) return "cached rerun changed its outputs";
    return {};
}

std::string check_two_stage_contract() {
    const QuestionSet qs = fixtures::synth_questions(1);

    for (int mask = 0; mask < 16; ++mask) {
        CotFieldSet fs;
        fs.caption = mask & 1;
        fs.summary = mask & 2;
        fs.reason = mask & 4;
        fs.confidence = mask & 8;

        // The split owes the descriptive items to the first pass and the
        // reasoning items to the second, with nothing lost or duplicated.
        const OutputSchemaSpec s1 = build_output_schema(fs, Stage::stage1);
        const OutputSchemaSpec s2 = build_output_schema(fs, Stage::stage2);
        const OutputSchemaSpec whole = build_output_schema(fs, Stage::single);
        const auto names1 = s1.key_names();
        const auto names2 = s2.key_names();
        const auto names_all = whole.key_names();
        const std::set<std::string> set1(names1.begin(), names1.end());
        const std::set<std::string> set2(names2.begin(), names2.end());
        const std::set<std::string> all(names_all.begin(), names_all.end());
        for (const auto& k : set1) {
            if (k != "captions" && k != "summary") return "stage1 owns " + k;
        }
        for (const auto& k : set2) {
            if (k == "captions" || k == "summary") return "stage2 owns " + k;
        }
        if (!set2.count("answer")) return "stage2 lost the answer";
        std::set<std::string> joined = set1;
        joined.insert(set2.begin(), set2.end());
        if (joined != all || set1.size() + set2.size() != all.size()) {
            return "stage split is not a partition for mask " + std::to_string(mask);
        }

        ModeConfig mode;
        mode.mode_id = "m_mask" + std::to_string(mask);
        mode.paradigm = Paradigm::two_stage;
        mode.prompt_style = PromptStyle::P2;
        mode.cot_fields = fs;
        mode.backend_id = "mock_a";
        mode.video_seconds = 8.0;

        if (!fs.caption && !fs.summary) {
            // Nothing for the first pass to produce; the config must refuse.
            try {
                mode.validate();
                return "empty first stage accepted for mask " + std::to_string(mask);
            } catch (const ValidationError&) {
                continue;
            }
        }

        BackendRegistry registry({fixtures::mock_profile("mock_a", 31)});
        RunOptions opts;
        opts.workers = 1;
        const ModeRunResult r = run_mode(mode, qs, registry, opts);
        if (r.records.size() != 1) return "expected one record";
        const RunRecord& rec = r.records[0];
        if (rec.abstained()) return "mask " + std::to_string(mask) + ": abstained";
        if (rec.stages.size() != 2) return "mask " + std::to_string(mask) + ": stage count";

        json payload;
        if (rec.parsed->captions) {
            json arr = json::array();
            for (const auto& c : *rec.parsed->captions) arr.push_back(c.text);
            payload["captions"] = std::move(arr);
        }
        if (rec.parsed->summary) payload["summary"] = *rec.parsed->summary;
        const std::string handoff = payload.dump(2);

        const std::string& prompt2 = rec.stages[1].prompts.front();
        if (prompt2.find(handoff) == std::string::npos) {
            return "mask " + std::to_string(mask) + ": first-pass output not embedded verbatim";
        }
        if (rec.parsed->summary &&
            prompt2.find(*rec.parsed->summary) == std::string::npos) {
            return "mask " + std::to_string(mask) + ": summary text not embedded";
        }
        if (rec.stages[0].prompts.front().find("\"answer\"") != std::string::npos) {
            return "mask " + std::to_string(mask) + ": first stage asks for the answer";
        }
        if (prompt2.find("\"answer\"") == std::string::npos) {
            return "mask " + std::to_string(mask) + ": second stage does not ask for the answer";
        }
    }
    return {};
}

std::string check_activation_sweep() {
    const QuestionSet qs = fixtures::synth_questions(10);
    const auto trio = fixtures::complementary_trio(qs);

    oracle::Instance inst;
    for (const auto& p : trio) {
        inst.answers.push_back(p.answers);
        int correct = 0;
        int graded = 0;
        for (const auto& [q_uid, a] : p.answers) {
            const auto truth = qs.truth_of(q_uid);
            if (!truth) continue;
            ++graded;
            if (a == *truth) ++correct;
        }
        inst.weights.push_back(static_cast<double>(correct) / static_cast<double>(graded));
    }
    const auto sim = oracle::similarity_matrix(inst);

    const auto oracle_accuracy = [&](const std::vector<int>& activation) {
        std::vector<int> active;
        for (std::size_t i = 0; i < activation.size(); ++i) {
            if (activation[i]) active.push_back(static_cast<int>(i));
        }
        int correct = 0;
        int decided = 0;
        for (const auto& q : qs.questions()) {
            const oracle::Decision d = oracle::vote(active, inst, sim, q.q_uid);
            if (!d.answered) continue;
            ++decided;
            if (d.r == *q.ground_truth) ++correct;
        }
        return std::pair<double, int>(
            static_cast<double>(correct) / static_cast<double>(decided), decided);
    };

    const auto vectors = all_activations(trio.size());
    if (vectors.size() != 7) return "expected 7 activation vectors";
    const SweepTable table = activation_sweep(vectors, trio, qs);
    if (table.rows.size() != 7) return "sweep holds " + std::to_string(table.rows.size()) +
                                       " rows";

    double best = 0.0;
    for (const auto& activation : vectors) {
        const auto [want_acc, want_n] = oracle_accuracy(activation);
        best = std::max(best, want_acc);
        const auto row = std::find_if(table.rows.begin(), table.rows.end(),
                                      [&](const SweepRow& r) {
                                          return r.activation == activation;
                                      });
        if (row == table.rows.end()) return "sweep lost an activation vector";
        if (row->accuracy != want_acc || row->evaluated != want_n) {
            std::string key;
            for (int b : activation) key += std::to_string(b);
            return "sweep row " + key + ": " + std::to_string(row->accuracy) +
                   " vs oracle " + std::to_string(want_acc);
        }
    }
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        if (table.rows[i - 1].accuracy < table.rows[i].accuracy) {
            return "sweep rows are not sorted by accuracy";
        }
    }

    const EnsembleSpec picked = select_modes(trio, qs, 3);
    const double picked_acc = ensemble_accuracy(picked, trio, qs);
    if (picked_acc != best) {
        return "auto-selection reached " + std::to_string(picked_acc) +
               ", exhaustive best is " + std::to_string(best);
    }
    return {};
}

struct Criterion {
    std::string name;
    double budget_seconds;  // 0 = no budget
    Check check;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"C1 fused decisions match a brute-force oracle on 1000 random instances", 10.0,
         check_vote_oracle_equivalence},
        {"C2 weight and similarity properties hold on 500 random cases", 5.0,
         check_weight_similarity_properties},
        {"C3 decisions are invariant under positive weight scaling", 5.0,
         check_scaling_invariance},
        {"C4 unanimous and single-mode ensembles reproduce their inputs", 5.0,
         check_unanimity_and_identity},
        {"C5 seven-mode effective weights match the frozen fixture", 0.0,
         check_seven_mode_fixture},
        {"C6 mock end-to-end run is byte-identical across repeats and worker counts", 30.0,
         check_end_to_end_determinism},
        {"C7 parser corpus outcomes match expectations on every fixture", 0.0,
         check_parser_corpus},
        {"C8 an identical rerun is served without any backend call", 0.0,
         check_cache_short_circuit},
        {"C9 first-pass findings embed verbatim in second-pass prompts for every field set",
         0.0, check_two_stage_contract},
        {"C10 activation sweep matches exhaustive oracle and auto-selection is maximal", 0.0,
         check_activation_sweep},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string verdict;
        const auto start = std::chrono::steady_clock::now();
        try {
            verdict = c.check();
        } catch (const std::exception& e) {
            verdict = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (verdict.empty() && c.budget_seconds > 0.0 && elapsed > c.budget_seconds) {
            verdict = "took " + std::to_string(elapsed) + "s, budget " +
                      std::to_string(c.budget_seconds) + "s";
        }
        char timing[32];
        std::snprintf(timing, sizeof(timing), " (%.2fs)", elapsed);
        if (verdict.empty()) {
            std::cout << "[PASS] " << c.name << timing << "\n";
        } else {
            std::cout << "[FAIL] " << c.name << timing << ": " << verdict << "\n";
            ++failures;
        }
    }
    return failures;
}
