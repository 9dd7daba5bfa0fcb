#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cast/preprocess.hpp"

namespace cast {

struct CorpusRecord {
  std::string id;
  std::string code;  // method source with a leading Javadoc
};

// Deterministic toy corpus of Java methods whose Javadoc summaries mention
// the method's verb/noun subtokens and the composite statements it uses.
// Same seed and n give byte-identical output.
std::vector<CorpusRecord> generate_corpus(std::uint64_t seed, int n);

// A method whose body is k nested if statements around one call.
std::string generate_nested_method(int k);

// Whether a method's AST has a composite statement inside another one.
bool has_nested_composite(const std::string& source);

// Parses every record with make_example; records that fail to lex, parse or
// yield a summary are skipped and described in `skipped` (when given).
std::vector<Example> examples_from_records(const std::vector<CorpusRecord>& records,
                                           std::vector<std::string>* skipped = nullptr);

}  // namespace cast
