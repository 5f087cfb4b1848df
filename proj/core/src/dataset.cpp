#include "repcount/dataset.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "repcount/error.hpp"

namespace repcount {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

namespace {

const std::set<std::string> kRecordKeys = {
    "id", "label", "rate_hz", "count_gt", "utterance_times_gt_s", "anchors_override", "scores_file", "values"};

double number_or_nan(const ordered_json& v, const std::string& source, std::size_t line_no) {
  // JSON has no NaN literal; serializers write it as null.
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ParseError(source, line_no, "expected a number, got " + v.dump());
  return v.get<double>();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_csv_numbers(const std::string& line, const std::string& source, std::size_t line_no) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    auto comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    const std::string field = trim(line.substr(pos, comma - pos));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError(source, line_no, "bad number '" + field + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::string safe_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_');
  }
  return out.empty() ? std::string("sample") : out;
}

}  // namespace

LabeledSample parse_record(const std::string& line, const std::string& source, std::size_t line_no) {
  ordered_json rec;
  try {
    rec = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
  }
  if (!rec.is_object()) throw ParseError(source, line_no, "record must be an object");
  for (const auto& [key, _] : rec.items()) {
    if (!kRecordKeys.count(key)) throw ParseError(source, line_no, "unknown field '" + key + "'");
  }
  for (const char* req : {"id", "rate_hz", "values", "count_gt"}) {
    if (!rec.contains(req)) throw ParseError(source, line_no, std::string("missing field '") + req + "'");
  }

  LabeledSample s;
  if (!rec["id"].is_string()) throw ParseError(source, line_no, "'id' must be a string");
  s.sensor.id = rec["id"].get<std::string>();
  s.sensor.rate_hz = number_or_nan(rec["rate_hz"], source, line_no);

  const auto& cnt = rec["count_gt"];
  if (!cnt.is_number_integer()) throw ParseError(source, line_no, "'count_gt' must be an integer");
  const auto count = cnt.get<long long>();
  if (count < 0 || count > std::numeric_limits<int>::max()) {
    throw ValidationError("sample '" + s.sensor.id + "': count_gt out of range");
  }
  s.count_gt = static_cast<int>(count);

  const auto& values = rec["values"];
  if (!values.is_array()) throw ParseError(source, line_no, "'values' must be an array of rows");
  const std::size_t n = values.size();
  std::size_t d = 0;
  std::vector<double> flat;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = values[r];
    if (!row.is_array()) throw ParseError(source, line_no, "'values' row " + std::to_string(r) + " is not an array");
    if (r == 0) {
      d = row.size();
      flat.reserve(n * d);
    } else if (row.size() != d) {
      throw ParseError(source, line_no, "'values' row " + std::to_string(r) + " has " +
                                            std::to_string(row.size()) + " entries, expected " + std::to_string(d));
    }
    for (const auto& v : row) flat.push_back(number_or_nan(v, source, line_no));
  }
  s.sensor.values = Matrix(n, d, std::move(flat));

  if (rec.contains("label")) {
    if (!rec["label"].is_string()) throw ParseError(source, line_no, "'label' must be a string");
    s.label = rec["label"].get<std::string>();
  }
  if (rec.contains("utterance_times_gt_s")) {
    const auto& t = rec["utterance_times_gt_s"];
    if (!t.is_array()) throw ParseError(source, line_no, "'utterance_times_gt_s' must be an array");
    std::vector<double> times;
    for (const auto& v : t) times.push_back(number_or_nan(v, source, line_no));
    s.utterance_times_gt_s = std::move(times);
  }
  if (rec.contains("anchors_override")) {
    const auto& a = rec["anchors_override"];
    if (!a.is_array()) throw ParseError(source, line_no, "'anchors_override' must be an array");
    std::vector<std::size_t> anchors;
    for (const auto& v : a) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ParseError(source, line_no, "'anchors_override' entries must be nonnegative integers");
      }
      anchors.push_back(v.get<std::size_t>());
    }
    s.anchors_override = std::move(anchors);
  }
  if (rec.contains("scores_file")) {
    if (!rec["scores_file"].is_string()) throw ParseError(source, line_no, "'scores_file' must be a string");
    s.scores_file = rec["scores_file"].get<std::string>();
  }
  return s;
}

std::string format_record(const LabeledSample& s) {
  // Doubles are emitted with the shortest round-trip representation.
  ordered_json rec;
  rec["id"] = s.sensor.id;
  if (s.label) rec["label"] = *s.label;
  rec["rate_hz"] = s.sensor.rate_hz;
  rec["count_gt"] = s.count_gt;
  if (s.utterance_times_gt_s) rec["utterance_times_gt_s"] = *s.utterance_times_gt_s;
  if (s.anchors_override) rec["anchors_override"] = *s.anchors_override;
  if (s.scores_file) rec["scores_file"] = *s.scores_file;
  ordered_json values = ordered_json::array();
  for (std::size_t r = 0; r < s.sensor.values.rows(); ++r) {
    const auto row = s.sensor.values.row(r);
    values.push_back(ordered_json(std::vector<double>(row.begin(), row.end())));
  }
  rec["values"] = std::move(values);
  return rec.dump();
}

std::vector<LabeledSample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset '" + path + "'");
  const fs::path dir = fs::path(path).parent_path();

  std::vector<LabeledSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    LabeledSample s = parse_record(line, path, line_no);
    if (s.scores_file) s.scores = load_scores_csv((dir / *s.scores_file).string());
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::vector<LabeledSample>& samples, const std::string& path) {
  const fs::path target(path);
  const fs::path dir = target.parent_path();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset '" + path + "'");
  for (const auto& sample : samples) {
    LabeledSample rec = sample;
    if (rec.scores) {
      if (!rec.scores_file) {
        rec.scores_file = target.stem().string() + "." + safe_file_stem(rec.id()) + ".scores.csv";
      }
      write_scores_csv(*rec.scores, (dir / *rec.scores_file).string());
    }
    out << format_record(rec) << '\n';
  }
}

ScoreMatrix load_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  ++line_no;
  std::string header;
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) header.push_back(c);
  }
  if (header != "t0_s,window_len_s,stride_s") {
    throw ParseError(path, line_no, "expected header 't0_s,window_len_s,stride_s'");
  }
  if (!std::getline(in, line)) throw ParseError(path, 2, "missing metadata line");
  ++line_no;
  const auto meta = parse_csv_numbers(line, path, line_no);
  if (meta.size() != 3) throw ParseError(path, line_no, "metadata line needs 3 values");

  ScoreMatrix sm;
  sm.t0_s = meta[0];
  sm.window_len_s = meta[1];
  sm.stride_s = meta[2];

  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (rows == 0 && t == "c1,c2,c3") continue;
    const auto vals = parse_csv_numbers(t, path, line_no);
    if (vals.size() != 3) throw ParseError(path, line_no, "score row needs 3 values");
    flat.insert(flat.end(), vals.begin(), vals.end());
    ++rows;
  }
  sm.scores = Matrix(rows, 3, std::move(flat));
  sm.validate();
  return sm;
}

void write_scores_csv(const ScoreMatrix& scores, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write score file '" + path + "'");
  out << "t0_s,window_len_s,stride_s\n";
  out << format_double(scores.t0_s) << ',' << format_double(scores.window_len_s) << ','
      << format_double(scores.stride_s) << '\n';
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << format_double(scores(i, 0)) << ',' << format_double(scores(i, 1)) << ','
        << format_double(scores(i, 2)) << '\n';
  }
}

}  // namespace repcount
