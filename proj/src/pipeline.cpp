#include "cast/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "cast/nn/checkpoint.hpp"
#include "cast/parser.hpp"
#include "cast/splitter.hpp"

namespace cast {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- run configuration ----------------------------------------------------------

void RunConfig::validate() const {
  auto positive = [](long long v, const char* key) {
    if (v <= 0) throw ConfigError(std::string(key) + " must be positive, got " + std::to_string(v));
  };
  positive(caps.ast, "vocab_ast");
  positive(caps.code, "vocab_code");
  positive(caps.summary, "vocab_summary");
  positive(model.d, "d");
  positive(model.heads, "heads");
  positive(model.enc_layers, "enc_layers");
  positive(model.dec_layers, "dec_layers");
  positive(model.ff, "ff");
  positive(model.k_clip, "k_clip");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(patience, "patience");
  positive(beam, "beam");
  positive(max_len, "max_len");
  positive(threads, "threads");
  if (model.d % model.heads != 0)
    throw ConfigError("d (" + std::to_string(model.d) + ") must be divisible by heads (" +
                      std::to_string(model.heads) + ")");
  if (model.dropout < 0.0 || model.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (optim.lr < 0.0) throw ConfigError("lr must be non-negative");
  if (optim.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (optim.beta1 < 0.0 || optim.beta1 >= 1.0 || optim.beta2 < 0.0 || optim.beta2 >= 1.0)
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0)
    throw ConfigError("valid_fraction and test_fraction must be non-negative and sum below 1");
}

namespace {

// One table drives both directions so the JSON keys and CLI flags never drift.
struct Field {
  const char* key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T, typename Access>
Field field(const char* key, Access access) {
  return Field{key, [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); },
               [access](RunConfig& c, const json& v) { access(c) = v.get<T>(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field<std::uint64_t>("seed", [](RunConfig& c) -> auto& { return c.seed; }),
      field<int>("vocab_ast", [](RunConfig& c) -> auto& { return c.caps.ast; }),
      field<int>("vocab_code", [](RunConfig& c) -> auto& { return c.caps.code; }),
      field<int>("vocab_summary", [](RunConfig& c) -> auto& { return c.caps.summary; }),
      field<int>("d", [](RunConfig& c) -> auto& { return c.model.d; }),
      field<int>("heads", [](RunConfig& c) -> auto& { return c.model.heads; }),
      field<int>("enc_layers", [](RunConfig& c) -> auto& { return c.model.enc_layers; }),
      field<int>("dec_layers", [](RunConfig& c) -> auto& { return c.model.dec_layers; }),
      field<int>("ff", [](RunConfig& c) -> auto& { return c.model.ff; }),
      field<int>("k_clip", [](RunConfig& c) -> auto& { return c.model.k_clip; }),
      field<double>("dropout", [](RunConfig& c) -> auto& { return c.model.dropout; }),
      field<bool>("no_aggregation", [](RunConfig& c) -> auto& { return c.model.no_aggregation; }),
      field<bool>("no_copy", [](RunConfig& c) -> auto& { return c.model.no_copy; }),
      field<double>("lr", [](RunConfig& c) -> auto& { return c.optim.lr; }),
      field<double>("weight_decay", [](RunConfig& c) -> auto& { return c.optim.weight_decay; }),
      field<double>("beta1", [](RunConfig& c) -> auto& { return c.optim.beta1; }),
      field<double>("beta2", [](RunConfig& c) -> auto& { return c.optim.beta2; }),
      field<double>("adam_eps", [](RunConfig& c) -> auto& { return c.optim.eps; }),
      field<int>("batch_size", [](RunConfig& c) -> auto& { return c.batch_size; }),
      field<int>("max_epochs", [](RunConfig& c) -> auto& { return c.max_epochs; }),
      field<int>("patience", [](RunConfig& c) -> auto& { return c.patience; }),
      field<int>("beam", [](RunConfig& c) -> auto& { return c.beam; }),
      field<int>("max_len", [](RunConfig& c) -> auto& { return c.max_len; }),
      field<int>("threads", [](RunConfig& c) -> auto& { return c.threads; }),
      field<double>("valid_fraction", [](RunConfig& c) -> auto& { return c.valid_fraction; }),
      field<double>("test_fraction", [](RunConfig& c) -> auto& { return c.test_fraction; }),
  };
  return table;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(c);
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->set(base, value);
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + value.dump());
    }
  }
  return base;
}

// ---- corpus files -----------------------------------------------------------------

void write_corpus(const fs::path& path, const std::vector<CorpusRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back({{"id", r.id}, {"code", r.code}});
  write_jsonl(path, rows);
}

std::vector<CorpusRecord> read_corpus(const fs::path& path, std::vector<std::string>* skipped) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<CorpusRecord> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line);
    try {
      json row = json::parse(text);
      if (!row.is_object() || !row.contains("id") || !row.contains("code") || !row["code"].is_string())
        throw DataError(where + ": record needs string fields \"id\" and \"code\"");
      out.push_back(
          {row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump(), row["code"].get<std::string>()});
    } catch (const json::exception& e) {
      if (!skipped) throw DataError(where + ": " + e.what());
      skipped->push_back(where + ": " + e.what());
    } catch (const DataError& e) {
      if (!skipped) throw;
      skipped->push_back(e.what());
    }
  }
  return out;
}

// ---- split inspection ---------------------------------------------------------------

SplitDump split_records(const std::vector<CorpusRecord>& records, std::vector<std::string> skipped) {
  SplitDump dump;
  dump.skipped = std::move(skipped);
  for (const auto& r : records) {
    try {
      SplitResult s = split(parse_method_source(r.code));
      dump.methods.push_back({{"id", r.id}, {"split", split_to_json(s)}, {"stats", stats_to_json(split_stats(s))}});
    } catch (const std::exception& e) {
      dump.skipped.push_back(r.id + ": " + e.what());
    }
  }
  return dump;
}

json SplitDump::summary() const {
  std::size_t subtrees = 0, max_sub_depth = 0, max_full_depth = 0, max_count = 0;
  for (const auto& m : methods) {
    const auto& st = m["stats"];
    subtrees += st["subtree_count"].get<std::size_t>();
    max_count = std::max(max_count, st["subtree_count"].get<std::size_t>());
    max_sub_depth = std::max(max_sub_depth, st["max_subtree_depth"].get<std::size_t>());
    max_full_depth = std::max(max_full_depth, st["full_tree_depth"].get<std::size_t>());
  }
  const double n = static_cast<double>(methods.size());
  return {{"methods", methods.size()},
          {"skipped", skipped.size()},
          {"subtrees", subtrees},
          {"mean_subtrees", n > 0 ? static_cast<double>(subtrees) / n : 0.0},
          {"max_subtrees", max_count},
          {"max_subtree_depth", max_sub_depth},
          {"max_full_tree_depth", max_full_depth}};
}

json SplitDump::to_json() const { return {{"methods", methods}, {"skipped", skipped}, {"stats", summary()}}; }

// ---- preprocessing ----------------------------------------------------------------

namespace {

void write_refs(const fs::path& path, const std::vector<Example>& examples) {
  std::vector<Summary> rows;
  for (const auto& e : examples) rows.push_back({e.id, e.summary_tokens});
  write_summaries(path, rows);
}

}  // namespace

PreprocessResult preprocess_corpus(const std::vector<CorpusRecord>& records, const RunConfig& run,
                                   const fs::path& out_dir) {
  run.validate();
  PreprocessResult res;
  std::vector<Example> examples = examples_from_records(records, &res.skipped);
  res.parsed = static_cast<int>(examples.size());
  if (examples.empty()) throw DataError("no record could be parsed");

  std::mt19937_64 rng(run.seed);
  std::shuffle(examples.begin(), examples.end(), rng);
  const auto n = examples.size();
  auto n_valid = static_cast<std::size_t>(std::llround(run.valid_fraction * static_cast<double>(n)));
  auto n_test = static_cast<std::size_t>(std::llround(run.test_fraction * static_cast<double>(n)));
  if (n_valid + n_test >= n) throw DataError("too few examples (" + std::to_string(n) + ") for the requested split");
  std::vector<Example> valid(examples.begin(), examples.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<Example> test(examples.begin() + static_cast<std::ptrdiff_t>(n_valid),
                            examples.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test));
  std::vector<Example> train(examples.begin() + static_cast<std::ptrdiff_t>(n_valid + n_test), examples.end());
  res.train = static_cast<int>(train.size());
  res.valid = static_cast<int>(valid.size());
  res.test = static_cast<int>(test.size());

  Vocabs vocabs = build_vocabs(train, run.caps);
  encode_all(train, vocabs, {}, &res.truncated);

  fs::create_directories(out_dir);
  write_examples(out_dir / "train.jsonl", train);
  write_examples(out_dir / "valid.jsonl", valid);
  write_examples(out_dir / "test.jsonl", test);
  write_refs(out_dir / "train.refs.jsonl", train);
  write_refs(out_dir / "valid.refs.jsonl", valid);
  write_refs(out_dir / "test.refs.jsonl", test);
  write_vocabs(out_dir, vocabs);
  return res;
}

// ---- model bundles ---------------------------------------------------------------------

json bundle_extra(const ModelConfig& cfg, const Vocabs& vocabs) {
  return {{"model", to_json(cfg)},
          {"vocabs", {{"ast", vocabs.ast.to_json()}, {"code", vocabs.code.to_json()}, {"summary", vocabs.summary.to_json()}}}};
}

ModelBundle load_bundle(const fs::path& checkpoint) {
  nn::Checkpoint ck;
  try {
    ck = nn::load_checkpoint(checkpoint);
  } catch (const nn::CheckpointError& e) {
    throw DataError(checkpoint.string() + ": " + e.what());
  }
  const std::string tag = checkpoint.string() + " (checkpoint format v" +
                          std::to_string(ck.manifest.value("version", 0)) + "): ";
  if (!ck.manifest.contains("model") || !ck.manifest.contains("vocabs"))
    throw DataError(tag + "manifest lacks the model configuration or vocabularies");
  ModelBundle b;
  try {
    b.config = model_config_from_json(ck.manifest["model"]);
    const auto& v = ck.manifest["vocabs"];
    b.vocabs.ast = Vocabulary::from_json(v.at("ast"));
    b.vocabs.code = Vocabulary::from_json(v.at("code"));
    b.vocabs.summary = Vocabulary::from_json(v.at("summary"));
    b.config.validate();
  } catch (const std::exception& e) {
    throw DataError(tag + e.what());
  }
  if (b.vocabs.ast.size() != b.config.ast_vocab || b.vocabs.code.size() != b.config.code_vocab ||
      b.vocabs.summary.size() != b.config.summary_vocab)
    throw DataError(tag + "vocabulary sizes disagree with the model configuration");
  b.params = init_params(b.config, 0);
  try {
    nn::restore_params(ck.params, b.params);
  } catch (const nn::CheckpointError& e) {
    throw DataError(tag + e.what());
  }
  return b;
}

// ---- training -------------------------------------------------------------------------

namespace {

std::vector<std::string> vocab_differences(const Vocabs& a, const Vocabs& b) {
  std::vector<std::string> out;
  auto cmp = [&](const Vocabulary& x, const Vocabulary& y, const char* name) {
    if (x.size() != y.size()) {
      out.push_back(std::string(name) + " vocabulary: expected " + std::to_string(x.size()) + " tokens, found " +
                    std::to_string(y.size()));
      return;
    }
    for (int i = 0; i < x.size(); ++i)
      if (x.token(i) != y.token(i)) {
        out.push_back(std::string(name) + " vocabulary: id " + std::to_string(i) + " is '" + x.token(i) +
                      "' in the data but '" + y.token(i) + "' in the checkpoint");
        return;
      }
  };
  cmp(a.ast, b.ast, "ast");
  cmp(a.code, b.code, "code");
  cmp(a.summary, b.summary, "summary");
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

TrainRunResult train_run(const RunConfig& run, const fs::path& data_dir, const fs::path& out_dir,
                         const std::optional<fs::path>& resume, bool verbose) {
  run.validate();
  Vocabs vocabs = read_vocabs(data_dir);
  auto train = encode_all(read_examples(data_dir / "train.jsonl"), vocabs);
  auto valid = fs::exists(data_dir / "valid.jsonl") ? encode_all(read_examples(data_dir / "valid.jsonl"), vocabs)
                                                    : std::vector<EncodedExample>{};
  if (train.empty()) throw DataError((data_dir / "train.jsonl").string() + " has no examples");

  ModelConfig cfg = run.model;
  cfg.ast_vocab = vocabs.ast.size();
  cfg.code_vocab = vocabs.code.size();
  cfg.summary_vocab = vocabs.summary.size();
  CastModel<float> model(cfg);
  auto params = init_params(cfg, run.seed);
  auto opt = nn::make_optim_state(params);
  TrainState state;

  fs::create_directories(out_dir);
  TrainRunResult out;
  out.log = out_dir / "train_log.jsonl";
  std::ofstream log(out.log, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + out.log.string());
  json header = {{"config", to_json(run)}, {"model", to_json(cfg)}, {"data", data_dir.string()}};

  if (resume) {
    ModelBundle prev = load_bundle(*resume / "last.ckpt");
    auto diffs = vocab_differences(vocabs, prev.vocabs);
    json want = to_json(cfg), have = to_json(prev.config);
    for (const auto& [k, v] : want.items())
      if (k != "dropout" && have.value(k, json()) != v)
        diffs.push_back("model " + k + ": expected " + v.dump() + ", found " + have.value(k, json()).dump());
    if (!diffs.empty()) throw DataError("cannot resume from " + resume->string() + ":\n  " + join(diffs, "\n  "));
    try {
      nn::restore_params(prev.params, params);
      load_optimizer(*resume / "last.opt", params, opt, state);
    } catch (const nn::CheckpointError& e) {
      throw DataError("cannot resume from " + resume->string() + ": " + e.what());
    }
    header["resumed_from"] = resume->string();
    header["resumed_epoch"] = state.epoch;
    if (!valid.empty()) header["resumed_val_loss"] = evaluate_loss(model, params, valid, run.threads).per_token();
  }
  log << header.dump() << "\n" << std::flush;

  TrainOptions opts;
  opts.optim = run.optim;
  opts.batch_size = run.batch_size;
  opts.max_epochs = run.max_epochs;
  opts.patience = run.patience;
  opts.seed = run.seed;
  opts.threads = run.threads;
  opts.decode.beam = run.beam;
  opts.decode.max_len = run.max_len;
  opts.out_dir = out_dir;
  opts.checkpoint_extra = bundle_extra(cfg, vocabs);
  opts.on_epoch = [&](const json& rec) {
    log << rec.dump() << "\n" << std::flush;
    if (verbose) std::cerr << rec.dump() << "\n";
  };
  out.result = train_model(model, params, opt, train, valid, vocabs, opts, state);
  out.best = out_dir / "best.ckpt";
  return out;
}

// ---- summaries and evaluation -------------------------------------------------------

std::vector<Example> read_inputs(const fs::path& path, std::vector<std::string>* skipped) {
  std::vector<Example> out;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    if (!row.is_object() || !row.contains("id"))
      throw DataError(path.string() + ":" + std::to_string(line) + ": record needs an \"id\"");
    std::string id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
    try {
      if (row.contains("code")) {
        out.push_back(make_example(id, row.at("code").get<std::string>(), std::nullopt, false));
      } else if (row.contains("split")) {
        out.push_back(example_from_json(row));
      } else {
        throw DataError(path.string() + ":" + std::to_string(line) + ": record has neither \"code\" nor \"split\"");
      }
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      if (!skipped) throw DataError(id + ": " + e.what());
      skipped->push_back(id + ": " + e.what());
    }
  }
  return out;
}

std::vector<Summary> summarize_examples(const ModelBundle& bundle, const std::vector<Example>& examples,
                                        const GenerateOptions& opts, int threads) {
  CastModel<float> model(bundle.config);
  auto encoded = encode_all(examples, bundle.vocabs);
  auto outputs = summarize_all(model, bundle.params, encoded, bundle.vocabs.summary, opts, threads);
  std::vector<Summary> rows;
  rows.reserve(outputs.size());
  for (std::size_t k = 0; k < outputs.size(); ++k) rows.push_back({examples[k].id, outputs[k].tokens});
  return rows;
}

void write_summaries(const fs::path& path, const std::vector<Summary>& rows) {
  std::vector<json> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    std::string text;
    for (std::size_t i = 0; i < r.tokens.size(); ++i) text += (i ? " " : "") + r.tokens[i];
    out.push_back({{"id", r.id}, {"summary", text}});
  }
  write_jsonl(path, out);
}

std::vector<Summary> read_summaries(const fs::path& path) {
  std::vector<Summary> out;
  std::size_t line = 0;
  for (const auto& row : read_jsonl(path)) {
    ++line;
    const std::string where = path.string() + ":" + std::to_string(line);
    if (!row.is_object() || !row.contains("id") || !row.contains("summary"))
      throw DataError(where + ": record needs \"id\" and \"summary\"");
    Summary s;
    s.id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
    const auto& sum = row["summary"];
    if (sum.is_string()) {
      std::istringstream in(sum.get<std::string>());
      for (std::string w; in >> w;) s.tokens.push_back(w);
    } else if (sum.is_array()) {
      for (const auto& w : sum) {
        if (!w.is_string()) throw DataError(where + ": summary tokens must be strings");
        s.tokens.push_back(w.get<std::string>());
      }
    } else {
      throw DataError(where + ": summary must be a string or an array of strings");
    }
    out.push_back(std::move(s));
  }
  return out;
}

EvalReport evaluate_summaries(const std::vector<Summary>& hyps, const std::vector<Summary>& refs) {
  std::map<std::string, const Summary*> by_id;
  std::set<std::string> dup_hyp, dup_ref, ref_ids;
  for (const auto& h : hyps)
    if (!by_id.emplace(h.id, &h).second) dup_hyp.insert(h.id);
  for (const auto& r : refs)
    if (!ref_ids.insert(r.id).second) dup_ref.insert(r.id);
  std::vector<std::string> missing, extra;
  for (const auto& r : refs)
    if (!by_id.count(r.id)) missing.push_back(r.id);
  for (const auto& [id, h] : by_id)
    if (!ref_ids.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty() || !dup_hyp.empty() || !dup_ref.empty()) {
    std::vector<std::string> parts;
    if (!missing.empty()) parts.push_back("missing from hypotheses: " + join(missing, ", "));
    if (!extra.empty()) parts.push_back("not in references: " + join(extra, ", "));
    if (!dup_hyp.empty()) parts.push_back("duplicated in hypotheses: " + join({dup_hyp.begin(), dup_hyp.end()}, ", "));
    if (!dup_ref.empty()) parts.push_back("duplicated in references: " + join({dup_ref.begin(), dup_ref.end()}, ", "));
    throw DataError("id mismatch between hypotheses and references\n  " + join(parts, "\n  "));
  }
  if (refs.empty()) throw DataError("no summaries to evaluate");
  std::vector<std::string> ids;
  std::vector<ScoredPair> pairs;
  for (const auto& r : refs) {
    ids.push_back(r.id);
    pairs.push_back({by_id[r.id]->tokens, r.tokens});
  }
  return evaluate(ids, pairs);
}

}  // namespace cast
