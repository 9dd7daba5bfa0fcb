#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cast/corpus.hpp"
#include "cast/dataset.hpp"
#include "cast/metrics.hpp"
#include "cast/model_config.hpp"
#include "cast/nn/optim.hpp"
#include "cast/seq_model.hpp"
#include "cast/train.hpp"

namespace cast {

// Problems with user input (files, records, ids, shapes). The CLI maps these
// to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (exit code 1).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Everything one run needs. JSON keys equal the field names; the CLI flag for
// a key is --key.
struct RunConfig {
  std::uint64_t seed = 1;
  VocabCaps caps;
  ModelConfig model;  // vocabulary sizes are filled in from the data
  nn::AdamWConfig optim;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 20;
  int beam = 1;
  int max_len = 30;
  int threads = 1;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
// Keys absent from `j` keep the values already in `base`; unknown keys are
// a ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

// ---- corpus files -----------------------------------------------------------

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);
// With `skipped`, malformed lines (bad JSON, missing fields) are recorded
// there and dropped; without it they are a DataError.
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path, std::vector<std::string>* skipped = nullptr);

// ---- split inspection ---------------------------------------------------------

struct SplitDump {
  nlohmann::json methods = nlohmann::json::array();  // {"id", "split", "stats"}
  std::vector<std::string> skipped;                  // "id: reason"
  nlohmann::json summary() const;                    // counts and aggregate stats
  nlohmann::json to_json() const;
};

// `skipped` seeds the skip list (e.g. with records dropped while reading).
SplitDump split_records(const std::vector<CorpusRecord>& records, std::vector<std::string> skipped = {});

// ---- preprocessing ------------------------------------------------------------

struct PreprocessResult {
  int parsed = 0;
  std::vector<std::string> skipped;
  int train = 0, valid = 0, test = 0;
  int truncated = 0;  // training examples cut by the length limits
};

// Parses records, shuffles with `run.seed`, splits into train/valid/test and
// writes {train,valid,test}.jsonl, {train,valid,test}.refs.jsonl and vocab.*.json
// (built from the training portion) into `out_dir`.
PreprocessResult preprocess_corpus(const std::vector<CorpusRecord>& records, const RunConfig& run,
                                   const std::filesystem::path& out_dir);

// ---- model bundles --------------------------------------------------------------

struct ModelBundle {
  ModelConfig config;
  Vocabs vocabs;
  nn::ParamSet<float> params;
};

// Checkpoint extra fields that make a checkpoint self-describing.
nlohmann::json bundle_extra(const ModelConfig& cfg, const Vocabs& vocabs);

// Loads a checkpoint written by training; tensor problems become DataError
// messages tagged with the checkpoint format version.
ModelBundle load_bundle(const std::filesystem::path& checkpoint);

// ---- training --------------------------------------------------------------------

struct TrainRunResult {
  TrainResult result;
  std::filesystem::path best;
  std::filesystem::path log;
};

// Trains on `data_dir` (from preprocess_corpus) into `out_dir`. With `resume`
// the parameters and optimizer state continue from that run directory; any
// shape or vocabulary mismatch is a DataError listing every difference.
TrainRunResult train_run(const RunConfig& run, const std::filesystem::path& data_dir,
                         const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& resume = std::nullopt, bool verbose = false);

// ---- summaries and evaluation ------------------------------------------------

struct Summary {
  std::string id;
  std::vector<std::string> tokens;
};

// Input records may be raw ({"id","code"}) or preprocessed examples.
std::vector<Example> read_inputs(const std::filesystem::path& path, std::vector<std::string>* skipped = nullptr);

std::vector<Summary> summarize_examples(const ModelBundle& bundle, const std::vector<Example>& examples,
                                        const GenerateOptions& opts, int threads = 1);

void write_summaries(const std::filesystem::path& path, const std::vector<Summary>& rows);
// "summary" may be a string (split on whitespace) or an array of tokens.
std::vector<Summary> read_summaries(const std::filesystem::path& path);

// Pairs hypotheses with references by id; any missing, extra or duplicated
// id is a DataError listing all of them.
EvalReport evaluate_summaries(const std::vector<Summary>& hyps, const std::vector<Summary>& refs);

}  // namespace cast
