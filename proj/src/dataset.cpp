#include "cast/dataset.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace cast {

std::vector<int> EncodedExample::decoder_input() const {
  std::vector<int> in{Vocabulary::kBos};
  for (std::size_t i = 0; i + 1 < target_base.size(); ++i) in.push_back(target_base[i]);
  return in;
}

std::string EncodedExample::ext_token(int id, const Vocabulary& summary) const {
  if (id < summary.size()) return summary.token(id);
  std::size_t k = static_cast<std::size_t>(id - summary.size());
  if (k >= oov.size()) throw std::out_of_range("extended id " + std::to_string(id) + " out of range");
  return oov[k];
}

Vocabs build_vocabs(const std::vector<Example>& corpus, const VocabCaps& caps) {
  VocabBuilder ast, code, summary;
  for (const auto& ex : corpus) {
    for (const auto& st : ex.split.subtrees)
      for (const auto& n : st.tree.nodes()) ast.add(n.label);
    code.add(ex.code_tokens);
    summary.add(ex.summary_tokens);
  }
  Vocabs v;
  v.ast = ast.build(Channel::Ast, caps.ast);
  v.code = code.build(Channel::Code, caps.code);
  v.summary = summary.build(Channel::Summary, caps.summary);
  return v;
}

namespace {

EncodedSubtree encode_subtree_labels(const Tree& tree, const Vocabulary& ast, int max_nodes, bool& cut) {
  // ids are preorder positions, so a preorder prefix keeps ids < max_nodes
  EncodedSubtree out;
  int n = static_cast<int>(tree.size());
  int keep = std::min(n, max_nodes);
  if (keep < n) cut = true;
  out.labels.resize(static_cast<std::size_t>(keep));
  out.children.resize(static_cast<std::size_t>(keep));
  for (int i = 0; i < keep; ++i) {
    const auto& node = tree.node(i);
    out.labels[static_cast<std::size_t>(i)] = ast.id(node.label);
    for (NodeId c : node.children)
      if (c < keep) out.children[static_cast<std::size_t>(i)].push_back(c);
  }
  return out;
}

}  // namespace

EncodedExample encode_example(const Example& ex, const Vocabs& vocabs, const Limits& limits, bool* truncated) {
  bool cut = false;
  EncodedExample e;
  e.id = ex.id;
  e.summary_tokens = ex.summary_tokens;
  e.summary_vocab_size = vocabs.summary.size();

  // structure preorder prefix: an edge survives when both ends survive
  int keep = std::min<int>(static_cast<int>(ex.split.subtrees.size()), limits.max_subtrees);
  if (keep < static_cast<int>(ex.split.subtrees.size())) cut = true;
  for (int i = 0; i < keep; ++i)
    e.subtrees.push_back(encode_subtree_labels(ex.split.subtrees[static_cast<std::size_t>(i)].tree, vocabs.ast,
                                               limits.max_subtree_nodes, cut));
  for (auto [p, c] : ex.split.structure.edges)
    if (p < keep && c < keep) e.structure.emplace_back(p, c);

  std::size_t ncode = std::min<std::size_t>(ex.code_tokens.size(), static_cast<std::size_t>(limits.max_code));
  if (ncode < ex.code_tokens.size()) cut = true;
  std::unordered_map<std::string, int> ext;
  for (std::size_t i = 0; i < ncode; ++i) {
    const auto& tok = ex.code_tokens[i];
    e.code_ids.push_back(vocabs.code.id(tok));
    if (vocabs.summary.contains(tok)) {
      e.code_ext.push_back(vocabs.summary.id(tok));
      continue;
    }
    auto [it, fresh] = ext.emplace(tok, vocabs.summary.size() + static_cast<int>(e.oov.size()));
    if (fresh) e.oov.push_back(tok);
    e.code_ext.push_back(it->second);
  }

  std::size_t nsum = std::min<std::size_t>(ex.summary_tokens.size(), static_cast<std::size_t>(limits.max_summary));
  if (nsum < ex.summary_tokens.size()) cut = true;
  for (std::size_t i = 0; i < nsum; ++i) {
    const auto& tok = ex.summary_tokens[i];
    int base = vocabs.summary.id(tok);
    int id = base;
    if (base == Vocabulary::kUnk && !vocabs.summary.contains(tok)) {
      auto it = ext.find(tok);
      if (it != ext.end()) id = it->second;
    }
    e.target.push_back(id);
    e.target_base.push_back(base);
  }
  e.target.push_back(Vocabulary::kEos);
  e.target_base.push_back(Vocabulary::kEos);
  if (truncated) *truncated = cut;
  return e;
}

nlohmann::json example_to_json(const Example& ex) {
  return {{"id", ex.id},
          {"code_tokens", ex.code_tokens},
          {"summary_tokens", ex.summary_tokens},
          {"split", split_to_json(ex.split)}};
}

Example example_from_json(const nlohmann::json& j) {
  Example ex;
  ex.id = j.at("id").get<std::string>();
  ex.code_tokens = j.at("code_tokens").get<std::vector<std::string>>();
  ex.summary_tokens = j.at("summary_tokens").get<std::vector<std::string>>();
  ex.split = split_from_json(j.at("split"));
  return ex;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<Example> read_examples(const std::filesystem::path& path) {
  std::vector<Example> out;
  for (const auto& j : read_jsonl(path)) out.push_back(example_from_json(j));
  return out;
}

void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::vector<nlohmann::json> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) rows.push_back(example_to_json(ex));
  write_jsonl(path, rows);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Vocabs read_vocabs(const std::filesystem::path& dir) {
  Vocabs v;
  v.ast = Vocabulary::from_json(read_json(dir / "vocab.ast.json"));
  v.code = Vocabulary::from_json(read_json(dir / "vocab.code.json"));
  v.summary = Vocabulary::from_json(read_json(dir / "vocab.summary.json"));
  return v;
}

void write_vocabs(const std::filesystem::path& dir, const Vocabs& v) {
  write_json(dir / "vocab.ast.json", v.ast.to_json());
  write_json(dir / "vocab.code.json", v.code.to_json());
  write_json(dir / "vocab.summary.json", v.summary.to_json());
}

std::vector<EncodedExample> encode_all(const std::vector<Example>& examples, const Vocabs& vocabs,
                                       const Limits& limits, int* truncated) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  int cut = 0;
  for (const auto& ex : examples) {
    bool t = false;
    out.push_back(encode_example(ex, vocabs, limits, &t));
    if (t) ++cut;
  }
  if (truncated) *truncated = cut;
  return out;
}

}  // namespace cast
