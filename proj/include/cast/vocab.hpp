#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace cast {

enum class Channel { Ast, Code, Summary };

const char* to_string(Channel c);
Channel channel_from_string(const std::string& s);

// Token <-> id map for one channel. Ids 0..3 are reserved.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  explicit Vocabulary(Channel channel = Channel::Summary);

  Channel channel() const { return channel_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // unk when absent
  const std::string& token(int id) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  // Appends a corpus token; no-op if present or reserved.
  void add(const std::string& token);

 private:
  Channel channel_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

bool is_reserved_token(std::string_view token);

// Frequency counter feeding a capped vocabulary.
class VocabBuilder {
 public:
  void add(const std::string& token) { ++counts_[token]; }
  void add(const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) add(t);
  }
  // Keeps the `cap` most frequent tokens (reserved ids not counted), ties
  // broken lexicographically.
  Vocabulary build(Channel channel, int cap) const;

 private:
  std::map<std::string, long long> counts_;
};

}  // namespace cast
