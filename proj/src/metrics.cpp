#include "cast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace cast {

namespace {

using NgramCounts = std::map<Tokens, int>;

NgramCounts ngrams(const Tokens& toks, std::size_t n) {
  NgramCounts out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[Tokens(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
  return out;
}

template <typename F>
double corpus_mean(const std::vector<ScoredPair>& pairs, F f) {
  if (pairs.empty()) throw std::invalid_argument("metric needs at least one pair");
  double total = 0.0;
  for (const auto& p : pairs) total += f(p.hyp, p.ref);
  return total / static_cast<double>(pairs.size());
}

}  // namespace

double sentence_bleu_cn(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto h = ngrams(hyp, n);
    auto r = ngrams(ref, n);
    int match = 0, total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = r.find(g);
      if (it != r.end()) match += std::min(c, it->second);
    }
    double smooth = n >= 2 ? 1.0 : 0.0;
    double p = (match + smooth) / (total + smooth);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / 4.0);
}

double bleu_cn(const std::vector<ScoredPair>& pairs) { return corpus_mean(pairs, sentence_bleu_cn); }

double sentence_rouge_l(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  std::vector<std::vector<int>> dp(hyp.size() + 1, std::vector<int>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= hyp.size(); ++i)
    for (std::size_t j = 1; j <= ref.size(); ++j)
      dp[i][j] = hyp[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
  double lcs = dp[hyp.size()][ref.size()];
  if (lcs == 0.0) return 0.0;
  const double beta2 = 1.2 * 1.2;
  double p = lcs / static_cast<double>(hyp.size());
  double r = lcs / static_cast<double>(ref.size());
  return ((1.0 + beta2) * p * r) / (r + beta2 * p);
}

double rouge_l(const std::vector<ScoredPair>& pairs) { return corpus_mean(pairs, sentence_rouge_l); }

namespace {

// Depth-first search over hypothesis positions with memoization on
// (position, previous alignment, used reference positions, matches so far).
class MeteorSearch {
 public:
  MeteorSearch(const Tokens& hyp, const Tokens& ref) : hyp_(hyp), ref_(ref) {
    std::unordered_map<std::string, int> hc, rc;
    for (const auto& w : hyp) ++hc[w];
    for (const auto& w : ref) ++rc[w];
    for (const auto& [w, c] : hc) {
      auto it = rc.find(w);
      if (it != rc.end()) target_ += std::min(c, it->second);
    }
    // matches still attainable from position i onwards (upper bound)
    remaining_.assign(hyp.size() + 1, 0);
    for (std::size_t i = hyp.size(); i-- > 0;)
      remaining_[i] = remaining_[i + 1] + (rc.count(hyp[i]) ? 1 : 0);
  }

  MeteorAlignment run() {
    if (target_ == 0) return {};
    int chunks = best(0, -1, 0, 0);
    return {target_, chunks};
  }

 private:
  static constexpr int kInf = 1 << 29;

  int best(std::size_t i, int prev_j, std::uint64_t used, int matched) {
    if (matched + remaining_[i] < target_) return kInf;
    if (i == hyp_.size()) return matched == target_ ? 0 : kInf;
    std::uint64_t key = (static_cast<std::uint64_t>(i) * 131 + static_cast<std::uint64_t>(prev_j + 1)) * 131 +
                        static_cast<std::uint64_t>(matched);
    auto memo_key = std::make_pair(key, used);
    if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;
    int result = best(i + 1, -1, used, matched);  // leave hyp[i] unaligned
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if ((used >> j) & 1U || ref_[j] != hyp_[i]) continue;
      int extra = prev_j >= 0 && static_cast<std::size_t>(prev_j) + 1 == j ? 0 : 1;
      int rest = best(i + 1, static_cast<int>(j), used | (std::uint64_t{1} << j), matched + 1);
      if (rest < kInf) result = std::min(result, rest + extra);
    }
    memo_[memo_key] = result;
    return result;
  }

  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
      return std::hash<std::uint64_t>()(p.first * 0x9E3779B97F4A7C15ULL ^ p.second);
    }
  };

  const Tokens& hyp_;
  const Tokens& ref_;
  int target_ = 0;
  std::vector<int> remaining_;
  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, int, PairHash> memo_;
};

}  // namespace

MeteorAlignment meteor_alignment(const Tokens& hyp, const Tokens& ref) {
  if (ref.size() > 64) {
    // beyond the bitmask width: align the reference prefix only
    Tokens head(ref.begin(), ref.begin() + 64);
    return MeteorSearch(hyp, head).run();
  }
  return MeteorSearch(hyp, ref).run();
}

double sentence_meteor_exact(const Tokens& hyp, const Tokens& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  auto a = meteor_alignment(hyp, ref);
  if (a.matches == 0) return 0.0;
  const double alpha = 0.9, beta = 3.0, gamma = 0.5;
  double p = static_cast<double>(a.matches) / static_cast<double>(hyp.size());
  double r = static_cast<double>(a.matches) / static_cast<double>(ref.size());
  double fmean = p * r / (alpha * p + (1.0 - alpha) * r);
  double penalty = gamma * std::pow(static_cast<double>(a.chunks) / a.matches, beta);
  return fmean * (1.0 - penalty);
}

double meteor_exact(const std::vector<ScoredPair>& pairs) { return corpus_mean(pairs, sentence_meteor_exact); }

std::vector<double> cider_scores(const std::vector<ScoredPair>& pairs) {
  const std::size_t N = pairs.size();
  if (N < 2) throw CorpusTooSmall();
  std::vector<double> scores(N, 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    std::vector<NgramCounts> hyp(N), ref(N);
    std::map<Tokens, int> df;
    for (std::size_t k = 0; k < N; ++k) {
      hyp[k] = ngrams(pairs[k].hyp, n);
      ref[k] = ngrams(pairs[k].ref, n);
      for (const auto& [g, c] : ref[k]) ++df[g];
    }
    // n-grams unseen in every reference take the rarest observed document
    // frequency, which keeps the weight a function of df/N only
    int min_df = static_cast<int>(N);
    for (const auto& [g, c] : df) min_df = std::min(min_df, c);
    auto idf = [&](const Tokens& g) {
      auto it = df.find(g);
      int f = it == df.end() ? min_df : it->second;
      return std::log(static_cast<double>(N) / static_cast<double>(f));
    };
    for (std::size_t k = 0; k < N; ++k) {
      double dot = 0.0, nh = 0.0, nr = 0.0;
      for (const auto& [g, c] : hyp[k]) {
        double w = c * idf(g);
        nh += w * w;
        auto it = ref[k].find(g);
        if (it != ref[k].end()) dot += w * (it->second * idf(g));
      }
      for (const auto& [g, c] : ref[k]) {
        double w = c * idf(g);
        nr += w * w;
      }
      if (nh > 0.0 && nr > 0.0) scores[k] += dot / (std::sqrt(nh) * std::sqrt(nr)) / 4.0;
    }
  }
  for (double& s : scores) s *= 10.0;
  return scores;
}

double cider(const std::vector<ScoredPair>& pairs) {
  auto s = cider_scores(pairs);
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

EvalReport evaluate(const std::vector<std::string>& ids, const std::vector<ScoredPair>& pairs) {
  if (ids.size() != pairs.size()) throw std::invalid_argument("evaluate: ids and pairs differ in length");
  EvalReport r;
  if (pairs.empty()) return r;
  std::vector<double> cs = pairs.size() >= 2 ? cider_scores(pairs) : std::vector<double>(pairs.size(), 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EvalReport::Row row{ids[k], sentence_bleu_cn(pairs[k].hyp, pairs[k].ref), sentence_meteor_exact(pairs[k].hyp, pairs[k].ref),
                        sentence_rouge_l(pairs[k].hyp, pairs[k].ref), cs[k]};
    r.bleu += row.bleu;
    r.meteor += row.meteor;
    r.rouge_l += row.rouge_l;
    r.cider += row.cider;
    r.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(pairs.size());
  r.bleu /= n;
  r.meteor /= n;
  r.rouge_l /= n;
  r.cider /= n;
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"id", row.id},
                    {"bleu", 100.0 * row.bleu},
                    {"meteor", 100.0 * row.meteor},
                    {"rouge_l", 100.0 * row.rouge_l},
                    {"cider", row.cider}});
  return {{"bleu", 100.0 * r.bleu},
          {"meteor", 100.0 * r.meteor},
          {"rouge_l", 100.0 * r.rouge_l},
          {"cider", r.cider},
          {"count", r.rows.size()},
          {"examples", rows}};
}

}  // namespace cast
