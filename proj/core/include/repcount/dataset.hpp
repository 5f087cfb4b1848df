#pragma once

#include <string>
#include <vector>

#include "repcount/types.hpp"

namespace repcount {

/// Reads a line-delimited dataset. Score files referenced by `scores_file`
/// are resolved relative to the dataset's directory.
std::vector<LabeledSample> load_dataset(const std::string& path);

/// Writes one record per line. Samples carrying scores get their CSV written
/// next to the dataset; a file name is generated when `scores_file` is unset.
void write_dataset(const std::vector<LabeledSample>& samples, const std::string& path);

/// Parses the record text of a single line (no score-file resolution).
LabeledSample parse_record(const std::string& line, const std::string& source, std::size_t line_no);
std::string format_record(const LabeledSample& sample);

ScoreMatrix load_scores_csv(const std::string& path);
void write_scores_csv(const ScoreMatrix& scores, const std::string& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace repcount
