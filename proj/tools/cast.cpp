// cast: command-line pipeline for the code summarizer.
//
//   cast gen --seed 7 --n 100 --out corpus.jsonl
//   cast preprocess --input corpus.jsonl --out data/
//   cast split --input corpus.jsonl --out split.json
//   cast train --config run.json --data data/ --out run/
//   cast summarize --checkpoint run/best.ckpt --input data/test.jsonl --out hyps.jsonl
//   cast eval --hyps hyps.jsonl --refs data/test.refs.jsonl
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 internal invariant violation.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "cast/nn/tensor.hpp"
#include "cast/pipeline.hpp"
#include "cast/splitter.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// Collects --key overrides for every run-configuration key.
struct ConfigFlags {
  std::optional<std::string> config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    const json defaults = cast::to_json(cast::RunConfig{});
    for (const auto& [key, def] : defaults.items()) {
      if (def.is_boolean()) {
        flags[key] = false;
        cmd->add_flag("--" + key, flags[key], "override config key " + key);
      } else {
        cmd->add_option("--" + key, values[key], "override config key " + key + " (default " + def.dump() + ")");
      }
    }
  }

  // Defaults < CAST_SEED < config file < flags.
  cast::RunConfig resolve(CLI::App* cmd) const {
    cast::RunConfig run;
    if (const char* env = std::getenv("CAST_SEED")) {
      try {
        run.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw cast::ConfigError(std::string("CAST_SEED is not an unsigned integer: ") + env);
      }
    }
    if (config_path) {
      std::ifstream in(*config_path);
      if (!in) throw cast::DataError("cannot open " + *config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw cast::ConfigError(*config_path + ": " + e.what());
      }
      run = cast::run_config_from_json(j, run);
    }
    json overrides = json::object();
    for (const auto& [key, text] : values) {
      if (cmd->count("--" + key) == 0) continue;
      try {
        overrides[key] = json::parse(text);
      } catch (const json::exception&) {
        overrides[key] = text;
      }
    }
    for (const auto& [key, on] : flags)
      if (on) overrides[key] = true;
    run = cast::run_config_from_json(overrides, run);
    run.validate();
    return run;
  }
};

void write_text(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(*path);
  if (!out) throw cast::DataError("cannot write " + *path);
  out << text << "\n";
}

void report_skipped(const std::vector<std::string>& skipped) {
  for (const auto& s : skipped) std::cerr << "skipped " << s << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAST code summarization pipeline"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a deterministic toy corpus");
  std::optional<std::uint64_t> gen_seed;
  int gen_n = 0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "generator seed (falls back to CAST_SEED, then 1)");
  gen->add_option("--n", gen_n, "number of methods")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output JSONL")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "parse, split and build vocabularies");
  std::string pre_in, pre_out;
  ConfigFlags pre_cfg;
  pre->add_option("--input", pre_in, "corpus JSONL with id and code")->required();
  pre->add_option("--out", pre_out, "output directory")->required();
  pre_cfg.attach(pre);

  // split
  auto* spl = app.add_subcommand("split", "dump the subtree split of every method");
  std::string spl_in;
  std::optional<std::string> spl_out;
  spl->add_option("--input", spl_in, "corpus JSONL with id and code")->required();
  spl->add_option("--out", spl_out, "output JSON (stdout when omitted)");

  // train
  auto* trn = app.add_subcommand("train", "train a model");
  std::string trn_data, trn_out;
  std::optional<std::string> trn_resume;
  bool trn_verbose = false;
  ConfigFlags trn_cfg;
  trn->add_option("--data", trn_data, "directory written by preprocess")->required();
  trn->add_option("--out", trn_out, "run directory for checkpoints and the log")->required();
  trn->add_option("--resume", trn_resume, "run directory to continue from");
  trn->add_flag("--verbose", trn_verbose, "print each epoch record to stderr");
  trn_cfg.attach(trn);

  // summarize
  auto* sum = app.add_subcommand("summarize", "generate summaries");
  std::string sum_ckpt, sum_in;
  std::optional<std::string> sum_out;
  int sum_beam = 1, sum_max_len = 30, sum_threads = 1;
  double sum_penalty = 1.0;
  sum->add_option("--checkpoint", sum_ckpt, "checkpoint written by train")->required();
  sum->add_option("--input", sum_in, "JSONL of raw or preprocessed methods")->required();
  sum->add_option("--out", sum_out, "output JSONL (stdout when omitted)");
  sum->add_option("--beam", sum_beam, "beam width, 1 = greedy")->check(CLI::PositiveNumber);
  sum->add_option("--max_len", sum_max_len, "maximum summary length")->check(CLI::PositiveNumber);
  sum->add_option("--length_penalty", sum_penalty, "beam score = logprob / length^penalty");
  sum->add_option("--threads", sum_threads, "worker threads")->check(CLI::PositiveNumber);

  // eval
  auto* evl = app.add_subcommand("eval", "score summaries against references");
  std::string evl_hyps, evl_refs;
  std::optional<std::string> evl_out;
  evl->add_option("--hyps", evl_hyps, "hypothesis JSONL {id, summary}")->required();
  evl->add_option("--refs", evl_refs, "reference JSONL {id, summary}")->required();
  evl->add_option("--out", evl_out, "report JSON (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      std::uint64_t seed = 1;
      if (gen_seed) {
        seed = *gen_seed;
      } else if (const char* env = std::getenv("CAST_SEED")) {
        seed = std::stoull(env);
      }
      cast::write_corpus(gen_out, cast::generate_corpus(seed, gen_n));
      std::cerr << "wrote " << gen_n << " methods to " << gen_out << "\n";
    } else if (pre->parsed()) {
      auto run = pre_cfg.resolve(pre);
      auto res = cast::preprocess_corpus(cast::read_corpus(pre_in), run, pre_out);
      report_skipped(res.skipped);
      json stats = {{"parsed", res.parsed}, {"skipped", res.skipped.size()}, {"train", res.train},
                    {"valid", res.valid},   {"test", res.test},             {"truncated", res.truncated}};
      std::cout << stats.dump() << "\n";
    } else if (spl->parsed()) {
      std::vector<std::string> bad;
      auto records = cast::read_corpus(spl_in, &bad);
      auto dump = cast::split_records(records, std::move(bad));
      report_skipped(dump.skipped);
      write_text(spl_out, dump.to_json().dump(2));
      if (spl_out) std::cerr << dump.summary().dump() << "\n";
    } else if (trn->parsed()) {
      auto run = trn_cfg.resolve(trn);
      auto res = cast::train_run(run, trn_data, trn_out, trn_resume ? std::optional<fs::path>(*trn_resume) : std::nullopt,
                                 trn_verbose);
      json done = {{"epochs", res.result.state.epoch},
                   {"best_epoch", res.result.state.best_epoch},
                   {"best_val_loss", res.result.state.best_val_loss},
                   {"train_loss", res.result.last_train_loss},
                   {"early_stopped", res.result.early_stopped},
                   {"checkpoint", res.best.string()},
                   {"log", res.log.string()}};
      std::cout << done.dump() << "\n";
    } else if (sum->parsed()) {
      auto bundle = cast::load_bundle(sum_ckpt);
      std::vector<std::string> skipped;
      auto examples = cast::read_inputs(sum_in, &skipped);
      report_skipped(skipped);
      cast::GenerateOptions opts;
      opts.beam = sum_beam;
      opts.max_len = sum_max_len;
      opts.length_penalty = sum_penalty;
      auto rows = cast::summarize_examples(bundle, examples, opts, sum_threads);
      if (sum_out) {
        cast::write_summaries(*sum_out, rows);
      } else {
        for (const auto& r : rows) {
          std::string text;
          for (std::size_t i = 0; i < r.tokens.size(); ++i) text += (i ? " " : "") + r.tokens[i];
          std::cout << json{{"id", r.id}, {"summary", text}}.dump() << "\n";
        }
      }
    } else if (evl->parsed()) {
      auto report = cast::evaluate_summaries(cast::read_summaries(evl_hyps), cast::read_summaries(evl_refs));
      write_text(evl_out, cast::report_to_json(report).dump(2));
    }
  } catch (const cast::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const cast::nn::GraphError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const cast::nn::ShapeError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const cast::StitchError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
