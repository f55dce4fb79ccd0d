#include "modefuse/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace modefuse {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModeWeight
// ---------------------------------------------------------------------------

json ModeWeight::to_json() const {
    return json{{"mode_id", mode_id}, {"w", w}, {"n_eval", n_eval}};
}

ModeWeight ModeWeight::from_json(const json& j) {
    ModeWeight m;
    try {
        m.mode_id = j.at("mode_id").get<std::string>();
        m.w = j.at("w").get<double>();
        m.n_eval = j.value("n_eval", 0);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad mode weight record: ") + e.what());
    }
    if (m.w < 0.0 || m.w > 1.0) {
        throw ValidationError("mode weight '" + m.mode_id + "' outside [0,1]");
    }
    return m;
}

// ---------------------------------------------------------------------------
// SimilarityMatrix
// ---------------------------------------------------------------------------

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> mode_ids)
    : ids_(std::move(mode_ids)) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) {
            throw ValidationError("duplicate mode_id in similarity matrix: " + ids_[i]);
        }
    }
    sim_.assign(ids_.size() * ids_.size(), std::numeric_limits<double>::quiet_NaN());
    overlap_.assign(ids_.size() * ids_.size(), 0);
}

std::size_t SimilarityMatrix::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw ValidationError("mode '" + id + "' is not in the similarity matrix");
    }
    return it->second;
}

bool SimilarityMatrix::has(const std::string& a, const std::string& b) const {
    return !std::isnan(sim_[index_of(a) * ids_.size() + index_of(b)]);
}

double SimilarityMatrix::at(const std::string& a, const std::string& b) const {
    const double v = sim_[index_of(a) * ids_.size() + index_of(b)];
    if (std::isnan(v)) {
        throw ValidationError("modes '" + a + "' and '" + b +
                              "' share no answered question; similarity undefined");
    }
    return v;
}

int SimilarityMatrix::overlap(const std::string& a, const std::string& b) const {
    return overlap_[index_of(a) * ids_.size() + index_of(b)];
}

void SimilarityMatrix::set(const std::string& a, const std::string& b, double sim,
                           int overlap) {
    if (sim < 0.0 || sim > 1.0) {
        throw ValidationError("similarity outside [0,1] for '" + a + "'/'" + b + "'");
    }
    const std::size_t i = index_of(a), j = index_of(b), n = ids_.size();
    sim_[i * n + j] = sim;
    sim_[j * n + i] = sim;
    overlap_[i * n + j] = overlap;
    overlap_[j * n + i] = overlap;
}

json SimilarityMatrix::to_json() const {
    json j;
    j["mode_ids"] = ids_;
    json rows = json::array();
    json overlaps = json::array();
    const std::size_t n = ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
        json row = json::array();
        json orow = json::array();
        for (std::size_t k = 0; k < n; ++k) {
            const double v = sim_[i * n + k];
            row.push_back(std::isnan(v) ? json(nullptr) : json(v));
            orow.push_back(overlap_[i * n + k]);
        }
        rows.push_back(std::move(row));
        overlaps.push_back(std::move(orow));
    }
    j["sim"] = std::move(rows);
    j["overlap"] = std::move(overlaps);
    return j;
}

SimilarityMatrix SimilarityMatrix::from_json(const json& j) {
    try {
        SimilarityMatrix m(j.at("mode_ids").get<std::vector<std::string>>());
        const auto& rows = j.at("sim");
        const std::size_t n = m.ids_.size();
        if (rows.size() != n) throw ValidationError("similarity matrix row count mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (rows[i].size() != n) {
                throw ValidationError("similarity matrix column count mismatch");
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (rows[i][k].is_null()) continue;
                int ov = 0;
                if (j.contains("overlap")) ov = j.at("overlap")[i][k].get<int>();
                m.set(m.ids_[i], m.ids_[k], rows[i][k].get<double>(), ov);
            }
        }
        // set() wrote both cells of each pair, so asymmetric input is a
        // matter of which write landed last; verify explicitly instead.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < i; ++k) {
                const bool a_null = rows[i][k].is_null(), b_null = rows[k][i].is_null();
                if (a_null != b_null ||
                    (!a_null && rows[i][k].get<double>() != rows[k][i].get<double>())) {
                    throw ValidationError("similarity matrix is not symmetric at '" +
                                          m.ids_[i] + "'/'" + m.ids_[k] + "'");
                }
            }
        }
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad similarity matrix record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// EnsembleSpec / EnsembleDecision
// ---------------------------------------------------------------------------

void EnsembleSpec::validate() const {
    if (active.empty()) throw ValidationError("ensemble spec with no active modes");
    std::set<std::string> seen;
    for (const auto& id : active) {
        if (!seen.insert(id).second) {
            throw ValidationError("ensemble spec activates '" + id + "' twice");
        }
        if (!weights.count(id)) {
            throw ValidationError("active mode '" + id + "' has no weight");
        }
        const auto& ids = similarity.mode_ids();
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
            throw ValidationError("active mode '" + id + "' has no similarity row");
        }
    }
}

json EnsembleSpec::to_json() const {
    json j;
    j["active"] = active;
    json ws = json::array();
    for (const auto& [id, mw] : weights) ws.push_back(mw.to_json());
    j["weights"] = std::move(ws);
    j["similarity"] = similarity.to_json();
    j["tie_policy"] = tie_policy;
    return j;
}

EnsembleSpec EnsembleSpec::from_json(const json& j) {
    EnsembleSpec s;
    try {
        s.active = j.at("active").get<std::vector<std::string>>();
        for (const auto& w : j.at("weights")) {
            ModeWeight mw = ModeWeight::from_json(w);
            s.weights[mw.mode_id] = std::move(mw);
        }
        s.similarity = SimilarityMatrix::from_json(j.at("similarity"));
        s.tie_policy = j.value("tie_policy", s.tie_policy);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad ensemble spec record: ") + e.what());
    }
    s.validate();
    return s;
}

json EnsembleDecision::to_json() const {
    json j;
    j["q_uid"] = q_uid;
    j["answer"] = r;
    j["scores"] = scores;
    j["participants"] = participants;
    j["tie"] = tie;
    return j;
}

// ---------------------------------------------------------------------------
// Weights and similarity
// ---------------------------------------------------------------------------

ModeWeight compute_weight(const PredictionSet& preds, const QuestionSet& qs) {
    int answered = 0;
    int correct = 0;
    for (const auto& [q_uid, ans] : preds.answers) {
        const std::optional<int> truth = qs.truth_of(q_uid);
        if (!truth) continue;
        ++answered;
        if (ans == *truth) ++correct;
    }
    if (answered == 0) {
        throw ValidationError("mode '" + preds.mode_id +
                              "' answered no labeled question; weight undefined");
    }
    ModeWeight mw;
    mw.mode_id = preds.mode_id;
    mw.w = static_cast<double>(correct) / static_cast<double>(answered);
    mw.n_eval = answered;
    return mw;
}

double compute_similarity(const PredictionSet& a, const PredictionSet& b) {
    int shared = 0;
    int agree = 0;
    for (const auto& [q_uid, ans] : a.answers) {
        auto it = b.answers.find(q_uid);
        if (it == b.answers.end()) continue;
        ++shared;
        if (ans == it->second) ++agree;
    }
    if (shared == 0) {
        throw ValidationError("modes '" + a.mode_id + "' and '" + b.mode_id +
                              "' share no answered question; similarity undefined");
    }
    return static_cast<double>(agree) / static_cast<double>(shared);
}

SimilarityMatrix build_similarity_matrix(const std::vector<PredictionSet>& preds) {
    std::vector<std::string> ids;
    ids.reserve(preds.size());
    for (const auto& p : preds) ids.push_back(p.mode_id);
    SimilarityMatrix m(std::move(ids));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i].answers.empty()) {
            m.set(preds[i].mode_id, preds[i].mode_id, 1.0,
                  static_cast<int>(preds[i].answers.size()));
        }
        for (std::size_t k = i + 1; k < preds.size(); ++k) {
            int shared = 0;
            for (const auto& [q_uid, ans] : preds[i].answers) {
                shared += preds[k].answers.count(q_uid) ? 1 : 0;
            }
            if (shared == 0) continue;  // missing cell
            m.set(preds[i].mode_id, preds[k].mode_id,
                  compute_similarity(preds[i], preds[k]), shared);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

double effective_weight(const std::string& mode_id, const EnsembleSpec& spec) {
    if (std::find(spec.active.begin(), spec.active.end(), mode_id) == spec.active.end()) {
        throw ValidationError("mode '" + mode_id + "' is not active in this ensemble");
    }
    double denom = 0.0;
    for (const auto& other : spec.active) denom += spec.similarity.at(mode_id, other);
    return spec.weights.at(mode_id).w / denom;
}

namespace {

const PredictionSet* find_preds(const std::vector<const PredictionSet*>& preds,
                                const std::string& mode_id) {
    for (const PredictionSet* p : preds) {
        if (p && p->mode_id == mode_id) return p;
    }
    return nullptr;
}

}  // namespace

EnsembleDecision vote(const std::string& q_uid, const EnsembleSpec& spec,
                      const std::vector<const PredictionSet*>& preds) {
    EnsembleDecision d;
    d.q_uid = q_uid;

    // Accumulation follows active order so equal specs yield bit-equal scores.
    std::array<double, kOptionCount> best_supporter_w{};
    std::array<bool, kOptionCount> supported{};
    for (const auto& mode_id : spec.active) {
        const PredictionSet* p = find_preds(preds, mode_id);
        if (!p) continue;
        auto it = p->answers.find(q_uid);
        if (it == p->answers.end()) continue;
        const auto c = static_cast<std::size_t>(it->second);
        d.scores[c] += effective_weight(mode_id, spec);
        d.participants.push_back(mode_id);
        supported[c] = true;
        best_supporter_w[c] = std::max(best_supporter_w[c], spec.weights.at(mode_id).w);
    }
    if (d.participants.empty()) {
        throw ValidationError("no active mode answered question '" + q_uid + "'");
    }

    const double top = *std::max_element(d.scores.begin(), d.scores.end());
    std::vector<int> tied;
    for (int c = 0; c < kOptionCount; ++c) {
        if (d.scores[static_cast<std::size_t>(c)] == top) tied.push_back(c);
    }
    d.tie = tied.size() > 1;
    // Tie policy: an option someone actually chose beats one nobody chose
    // (zero-weight modes score 0, tying their pick with empty options), then
    // the strongest single supporter by raw weight, then the lowest index.
    d.r = tied.front();
    for (int c : tied) {
        const auto ci = static_cast<std::size_t>(c);
        const auto ri = static_cast<std::size_t>(d.r);
        if (supported[ci] != supported[ri]) {
            if (supported[ci]) d.r = c;
        } else if (best_supporter_w[ci] > best_supporter_w[ri]) {
            d.r = c;
        }
    }
    return d;
}

std::map<std::string, EnsembleDecision> fuse(const EnsembleSpec& spec,
                                             const std::vector<PredictionSet>& preds) {
    spec.validate();
    std::vector<const PredictionSet*> ptrs;
    ptrs.reserve(preds.size());
    for (const auto& p : preds) ptrs.push_back(&p);

    std::set<std::string> q_uids;
    for (const auto& mode_id : spec.active) {
        const PredictionSet* p = find_preds(ptrs, mode_id);
        if (!p) throw ValidationError("no predictions supplied for active mode '" + mode_id + "'");
        for (const auto& [q_uid, ans] : p->answers) q_uids.insert(q_uid);
    }

    std::map<std::string, EnsembleDecision> out;
    for (const auto& q_uid : q_uids) out.emplace(q_uid, vote(q_uid, spec, ptrs));
    return out;
}

double ensemble_accuracy(const EnsembleSpec& spec, const std::vector<PredictionSet>& preds,
                         const QuestionSet& qs) {
    const auto decisions = fuse(spec, preds);
    int evaluated = 0;
    int correct = 0;
    for (const auto& [q_uid, d] : decisions) {
        const std::optional<int> truth = qs.truth_of(q_uid);
        if (!truth) continue;
        ++evaluated;
        if (d.r == *truth) ++correct;
    }
    if (evaluated == 0) {
        throw ValidationError("ensemble answered no labeled question; accuracy undefined");
    }
    return static_cast<double>(correct) / static_cast<double>(evaluated);
}

// ---------------------------------------------------------------------------
// Spec assembly and selection
// ---------------------------------------------------------------------------

EnsembleSpec make_ensemble_spec(const std::vector<PredictionSet>& candidates,
                                const QuestionSet& qs,
                                const std::vector<std::string>& active_ids) {
    EnsembleSpec spec;
    spec.similarity = build_similarity_matrix(candidates);
    for (const auto& p : candidates) spec.weights[p.mode_id] = compute_weight(p, qs);
    for (const auto& id : active_ids) {
        if (std::none_of(candidates.begin(), candidates.end(),
                         [&](const PredictionSet& p) { return p.mode_id == id; })) {
            throw ValidationError("activation names unknown mode '" + id + "'");
        }
        spec.active.push_back(id);
    }
    spec.validate();
    return spec;
}

EnsembleSpec select_modes(const std::vector<PredictionSet>& candidates,
                          const QuestionSet& qs, int max_k) {
    if (candidates.empty()) throw ValidationError("select_modes: no candidates");
    if (max_k < 1) throw ValidationError("select_modes: max_k must be >= 1");

    EnsembleSpec spec;
    spec.similarity = build_similarity_matrix(candidates);
    for (const auto& p : candidates) spec.weights[p.mode_id] = compute_weight(p, qs);

    // Seed: heaviest candidate, earliest wins ties.
    std::size_t seed = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (spec.weights.at(candidates[i].mode_id).w >
            spec.weights.at(candidates[seed].mode_id).w) {
            seed = i;
        }
    }

    std::vector<std::string> selected = {candidates[seed].mode_id};
    std::vector<char> used(candidates.size(), 0);
    used[seed] = 1;

    auto accuracy_of = [&](const std::vector<std::string>& active) {
        EnsembleSpec trial = spec;
        trial.active = active;
        return ensemble_accuracy(trial, candidates, qs);
    };

    std::vector<double> prefix_acc = {accuracy_of(selected)};
    const int limit = std::min<int>(max_k, static_cast<int>(candidates.size()));
    while (static_cast<int>(selected.size()) < limit) {
        int best = -1;
        double best_acc = -1.0;
        double best_mean_sim = 2.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            const std::string& id = candidates[i].mode_id;
            std::vector<std::string> trial = selected;
            trial.push_back(id);
            double acc;
            try {
                acc = accuracy_of(trial);
            } catch (const ValidationError&) {
                continue;  // candidate lacks overlap with the selection
            }
            double mean_sim = 0.0;
            bool sims_ok = true;
            for (const auto& s : selected) {
                if (!spec.similarity.has(id, s)) {
                    sims_ok = false;
                    break;
                }
                mean_sim += spec.similarity.at(id, s);
            }
            if (!sims_ok) continue;
            mean_sim /= static_cast<double>(selected.size());
            if (acc > best_acc || (acc == best_acc && mean_sim < best_mean_sim)) {
                best = static_cast<int>(i);
                best_acc = acc;
                best_mean_sim = mean_sim;
            }
        }
        if (best < 0) break;
        used[static_cast<std::size_t>(best)] = 1;
        selected.push_back(candidates[static_cast<std::size_t>(best)].mode_id);
        prefix_acc.push_back(best_acc);
    }

    // Two-mode ensembles reduce to the heavier mode, so accuracy can plateau
    // before it improves; pick the best prefix instead of stopping early.
    std::size_t best_len = 1;
    for (std::size_t len = 2; len <= selected.size(); ++len) {
        if (prefix_acc[len - 1] > prefix_acc[best_len - 1]) best_len = len;
    }
    selected.resize(best_len);
    spec.active = std::move(selected);
    spec.validate();
    return spec;
}

}  // namespace modefuse
