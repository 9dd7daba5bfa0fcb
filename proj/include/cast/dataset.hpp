#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cast/preprocess.hpp"
#include "cast/splitter.hpp"
#include "cast/vocab.hpp"

namespace cast {

struct Limits {
  int max_code = 200;
  int max_summary = 30;
  int max_subtrees = 40;
  int max_subtree_nodes = 100;
};

// One subtree ready for the RvNN: labels in preorder plus child lists.
struct EncodedSubtree {
  std::vector<int> labels;
  std::vector<std::vector<int>> children;
};

struct EncodedExample {
  std::string id;
  std::vector<EncodedSubtree> subtrees;           // structure preorder
  std::vector<std::pair<int, int>> structure;     // (parent, child)
  std::vector<int> code_ids;                      // code vocabulary ids
  std::vector<int> code_ext;                      // extended summary id per code position
  std::vector<std::string> oov;                   // extended ids base+k -> oov[k]
  std::vector<int> target;                        // summary + eos, extended ids
  std::vector<int> target_base;                   // same with oov mapped to unk
  std::vector<std::string> summary_tokens;        // reference (untruncated)
  int summary_vocab_size = 0;

  // Decoder input: bos followed by target_base without its last element.
  std::vector<int> decoder_input() const;
  std::string ext_token(int id, const Vocabulary& summary) const;
};

struct Vocabs {
  Vocabulary ast{Channel::Ast};
  Vocabulary code{Channel::Code};
  Vocabulary summary{Channel::Summary};
};

struct VocabCaps {
  int ast = 10000;
  int code = 30000;
  int summary = 50000;
};

Vocabs build_vocabs(const std::vector<Example>& corpus, const VocabCaps& caps);

// Truncates to `limits` (prefix of the structure preorder for subtrees,
// preorder prefix for nodes); `truncated` reports whether anything was cut.
EncodedExample encode_example(const Example& ex, const Vocabs& vocabs, const Limits& limits = {},
                              bool* truncated = nullptr);

// encode_example over a whole corpus; `truncated` counts examples that were cut.
std::vector<EncodedExample> encode_all(const std::vector<Example>& examples, const Vocabs& vocabs,
                                       const Limits& limits = {}, int* truncated = nullptr);

// Processed-example JSON lines.
nlohmann::json example_to_json(const Example& ex);
Example example_from_json(const nlohmann::json& j);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
std::vector<Example> read_examples(const std::filesystem::path& path);
void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
Vocabs read_vocabs(const std::filesystem::path& dir);
void write_vocabs(const std::filesystem::path& dir, const Vocabs& v);

}  // namespace cast
