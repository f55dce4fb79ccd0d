#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "modefuse/core.hpp"

namespace modefuse {

// A mode's voting strength: its accuracy over the labeled questions it
// answered, with the evaluation count kept alongside.
struct ModeWeight {
    std::string mode_id;
    double w = 0.0;
    int n_eval = 0;

    nlohmann::json to_json() const;
    static ModeWeight from_json(const nlohmann::json& j);
};

// Pairwise agreement between modes. Symmetric with a unit diagonal; a cell
// is missing when two modes share no answered question.
class SimilarityMatrix {
  public:
    SimilarityMatrix() = default;
    explicit SimilarityMatrix(std::vector<std::string> mode_ids);

    const std::vector<std::string>& mode_ids() const { return ids_; }
    bool has(const std::string& a, const std::string& b) const;
    double at(const std::string& a, const std::string& b) const;
    int overlap(const std::string& a, const std::string& b) const;
    // Writes both symmetric cells.
    void set(const std::string& a, const std::string& b, double sim, int overlap);

    nlohmann::json to_json() const;
    static SimilarityMatrix from_json(const nlohmann::json& j);

  private:
    std::size_t index_of(const std::string& id) const;

    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> index_;
    std::vector<double> sim_;      // row-major, NaN = missing
    std::vector<int> overlap_;
};

// Everything the vote needs: which modes participate, their weights, and
// their pairwise similarity. Active order is the accumulation order, kept
// stable so equal inputs reproduce bit-equal scores.
struct EnsembleSpec {
    std::vector<std::string> active;
    std::map<std::string, ModeWeight> weights;
    SimilarityMatrix similarity;
    std::string tie_policy = "max_weight_supporter_then_lowest_index";

    void validate() const;  // every active mode has a weight and a matrix row
    nlohmann::json to_json() const;
    static EnsembleSpec from_json(const nlohmann::json& j);
};

struct EnsembleDecision {
    std::string q_uid;
    int r = 0;
    std::array<double, kOptionCount> scores{};
    std::vector<std::string> participants;  // active modes that answered, active order
    bool tie = false;                       // >=2 options attained the max score

    nlohmann::json to_json() const;
};

// Accuracy of one mode over the labeled questions it answered.
// Errors when the mode answered no labeled question.
ModeWeight compute_weight(const PredictionSet& preds, const QuestionSet& qs);

// Fraction of shared-answered questions with equal answers.
// Errors when the two sets share no answered question.
double compute_similarity(const PredictionSet& a, const PredictionSet& b);

// All pairwise similarities; pairs without overlap are left as missing cells.
SimilarityMatrix build_similarity_matrix(const std::vector<PredictionSet>& preds);

// w_k divided by the sum of k's similarity to every active mode, self
// included, so the denominator is always >= 1 and redundancy costs weight.
double effective_weight(const std::string& mode_id, const EnsembleSpec& spec);

// The similarity-modulated weighted vote for one question. Each active mode
// that answered adds its effective weight to its chosen option; the top
// option wins. Ties go to the option backed by the strongest single mode by
// raw weight, then to the lowest option index, and set the tie flag.
EnsembleDecision vote(const std::string& q_uid, const EnsembleSpec& spec,
                      const std::vector<const PredictionSet*>& preds);

// Votes every question answered by at least one active mode.
std::map<std::string, EnsembleDecision> fuse(const EnsembleSpec& spec,
                                             const std::vector<PredictionSet>& preds);

// Fused accuracy over labeled questions that received a decision.
double ensemble_accuracy(const EnsembleSpec& spec, const std::vector<PredictionSet>& preds,
                         const QuestionSet& qs);

// Builds a spec for an explicit activation subset of the candidates, in
// candidate order. Weights need labels; similarity needs pairwise overlap.
EnsembleSpec make_ensemble_spec(const std::vector<PredictionSet>& candidates,
                                const QuestionSet& qs,
                                const std::vector<std::string>& active_ids);

// Greedy forward selection: seed with the heaviest mode, repeatedly add the
// candidate whose addition maximizes labeled-subset ensemble accuracy (ties:
// lower mean similarity to the current selection, then candidate order),
// growing to max_k, and return the accuracy-maximal prefix (shortest wins a
// tie). Growing past apparent plateaus matters: with two active modes the
// vote always equals the heavier mode alone, so improvement can first appear
// at size three.
EnsembleSpec select_modes(const std::vector<PredictionSet>& candidates,
                          const QuestionSet& qs, int max_k);

}  // namespace modefuse
