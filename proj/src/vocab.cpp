#include "cast/vocab.hpp"

#include <algorithm>
#include <stdexcept>

namespace cast {

namespace {

const char* const kReservedTokens[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

}  // namespace

const char* to_string(Channel c) {
  switch (c) {
    case Channel::Ast: return "ast";
    case Channel::Code: return "code";
    case Channel::Summary: return "summary";
  }
  return "?";
}

Channel channel_from_string(const std::string& s) {
  if (s == "ast") return Channel::Ast;
  if (s == "code") return Channel::Code;
  if (s == "summary") return Channel::Summary;
  throw std::invalid_argument("unknown vocabulary channel '" + s + "'");
}

bool is_reserved_token(std::string_view token) {
  for (const char* r : kReservedTokens)
    if (token == r) return true;
  return false;
}

Vocabulary::Vocabulary(Channel channel) : channel_(channel) {
  for (const char* r : kReservedTokens) {
    index_.emplace(r, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(r);
  }
}

void Vocabulary::add(const std::string& token) {
  if (index_.count(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

nlohmann::json Vocabulary::to_json() const { return {{"channel", to_string(channel_)}, {"tokens", tokens_}}; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v(channel_from_string(j.at("channel").get<std::string>()));
  auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kReserved) throw std::invalid_argument("vocabulary file lacks reserved tokens");
  for (int i = 0; i < kReserved; ++i)
    if (tokens[static_cast<std::size_t>(i)] != kReservedTokens[i])
      throw std::invalid_argument("vocabulary file has '" + tokens[static_cast<std::size_t>(i)] + "' at reserved id " +
                                  std::to_string(i));
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

Vocabulary VocabBuilder::build(Channel channel, int cap) const {
  if (cap < 1) throw std::invalid_argument("vocabulary cap must be positive");
  std::vector<std::pair<std::string, long long>> items;
  for (const auto& [tok, n] : counts_)
    if (!is_reserved_token(tok)) items.emplace_back(tok, n);
  // counts_ is ordered, so a stable sort by count keeps ties lexicographic
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v(channel);
  for (std::size_t i = 0; i < items.size() && static_cast<int>(i) < cap; ++i) v.add(items[i].first);
  return v;
}

}  // namespace cast
