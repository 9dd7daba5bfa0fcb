#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cast {

using Tokens = std::vector<std::string>;

struct ScoredPair {
  Tokens hyp;
  Tokens ref;
};

class CorpusTooSmall : public std::runtime_error {
 public:
  CorpusTooSmall() : std::runtime_error("CIDEr needs at least two reference sentences") {}
};

// Smoothed sentence BLEU-4: add-one on the n >= 2 precisions, brevity
// penalty exp(1 - r/c) when c < r. The corpus score is the mean.
double sentence_bleu_cn(const Tokens& hyp, const Tokens& ref);
double bleu_cn(const std::vector<ScoredPair>& pairs);

// LCS-based F-measure with beta = 1.2.
double sentence_rouge_l(const Tokens& hyp, const Tokens& ref);
double rouge_l(const std::vector<ScoredPair>& pairs);

// Exact-match METEOR: alignment maximizing matches, then minimizing chunks;
// alpha 0.9, beta 3, gamma 0.5.
struct MeteorAlignment {
  int matches = 0;
  int chunks = 0;
};
MeteorAlignment meteor_alignment(const Tokens& hyp, const Tokens& ref);
double sentence_meteor_exact(const Tokens& hyp, const Tokens& ref);
double meteor_exact(const std::vector<ScoredPair>& pairs);

// Plain CIDEr (no clipping, no length penalty) over n = 1..4, scaled by 10.
// Per-pair scores; throws CorpusTooSmall for fewer than two pairs.
std::vector<double> cider_scores(const std::vector<ScoredPair>& pairs);
double cider(const std::vector<ScoredPair>& pairs);

struct EvalReport {
  double bleu = 0.0;
  double meteor = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  struct Row {
    std::string id;
    double bleu, meteor, rouge_l, cider;
  };
  std::vector<Row> rows;
};

// All four metrics; CIDEr is reported as 0 for a single-pair corpus.
EvalReport evaluate(const std::vector<std::string>& ids, const std::vector<ScoredPair>& pairs);
// BLEU/METEOR/ROUGE-L shown x100, CIDEr raw.
nlohmann::json report_to_json(const EvalReport& r);

}  // namespace cast
