#pragma once

// File formats: JSON-lines datasets, chain CSV, plain CSV tables, atomic
// writes.

#include <cstdio>
#include <cstdlib>
#include <type_traits>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "kdbirl/demonstrations.hpp"
#include "kdbirl/density.hpp"
#include "kdbirl/errors.hpp"
#include "kdbirl/inference.hpp"

namespace kdbirl {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Shortest text that round-trips the double exactly.
inline std::string format_double(double x) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a truncated file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("ill-formed JSON in " + path.string() + ": " + e.what());
  }
}

inline json demonstration_to_json(const Demonstration& d, int task_id) {
  json j;
  if (d.has_index()) {
    j["state_index"] = d.state_index();
  } else {
    j["feature_vector"] = d.state_vector();
  }
  j["action_index"] = d.action;
  j["task_id"] = task_id;
  return j;
}

inline Demonstration demonstration_from_json(const json& j) {
  if (!j.contains("action_index")) throw DataError("record lacks action_index");
  const auto action = j.at("action_index").get<std::size_t>();
  if (j.contains("state_index")) {
    return {j.at("state_index").get<std::size_t>(), action};
  }
  if (j.contains("feature_vector")) {
    return {j.at("feature_vector").get<std::vector<double>>(), action};
  }
  throw DataError("record lacks state_index and feature_vector");
}

template <class RecordFn>
std::string to_json_lines(std::size_t n, RecordFn&& record) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += record(i).dump();
    out += '\n';
  }
  return out;
}

inline std::string demonstrations_to_jsonl(const std::vector<Demonstration>& demos,
                                           int task_id) {
  return to_json_lines(demos.size(), [&](std::size_t i) {
    return demonstration_to_json(demos[i], task_id);
  });
}

inline std::string training_to_jsonl(const std::vector<TrainingSample>& training) {
  return to_json_lines(training.size(), [&](std::size_t i) {
    auto j = demonstration_to_json(training[i].demo, training[i].task_id);
    j["reward_vector"] = training[i].reward.values();
    return j;
  });
}

template <class LineFn>
void for_each_json_line(const fs::path& path, LineFn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::vector<Demonstration> read_demonstrations(const fs::path& path) {
  std::vector<Demonstration> out;
  for_each_json_line(path, [&](const json& j) {
    out.push_back(demonstration_from_json(j));
  });
  return out;
}

inline std::vector<TrainingSample> read_training(const fs::path& path,
                                                 RewardKind kind) {
  std::vector<TrainingSample> out;
  for_each_json_line(path, [&](const json& j) {
    if (!j.contains("reward_vector")) throw DataError("record lacks reward_vector");
    TrainingSample t;
    t.demo = demonstration_from_json(j);
    t.reward = RewardParams(kind, j.at("reward_vector").get<std::vector<double>>());
    t.task_id = j.value("task_id", 0);
    out.push_back(std::move(t));
  });
  return out;
}

// Chain CSV: one retained draw per row, columns r0..r{d-1}, log_posterior,
// accepted.
inline std::string chain_to_csv(const PosteriorChain& chain) {
  std::string out;
  for (std::size_t d = 0; d < chain.dim(); ++d) {
    out += "r" + std::to_string(d) + ",";
  }
  out += "log_posterior,accepted\n";
  for (std::size_t i : chain.retained_indices()) {
    for (double v : chain.draws[i]) {
      out += format_double(v);
      out += ',';
    }
    out += format_double(chain.log_posterior[i]);
    out += chain.accepted[i] ? ",1\n" : ",0\n";
  }
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    // stod rejects "inf"-style log posteriors on some platforms.
    if (text == "-inf") return neg_inf;
    throw DataError("bad number '" + text + "' in " + where);
  }
}

inline PosteriorChain read_chain_csv(const fs::path& path, RewardKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read chain " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("chain file is empty: " + path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[header.size() - 2] != "log_posterior" ||
      header.back() != "accepted") {
    throw DataError("chain header malformed in " + path.string());
  }
  const std::size_t dim = header.size() - 2;
  PosteriorChain chain;
  chain.kind = kind;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw DataError("wrong column count at " + where);
    std::vector<double> draw(dim);
    for (std::size_t d = 0; d < dim; ++d) draw[d] = parse_double(cells[d], where);
    chain.draws.push_back(std::move(draw));
    chain.log_posterior.push_back(parse_double(cells[dim], where));
    if (cells[dim + 1] != "0" && cells[dim + 1] != "1") {
      throw DataError("accepted must be 0 or 1 at " + where);
    }
    chain.accepted.push_back(cells[dim + 1] == "1");
  }
  if (chain.draws.empty()) throw DataError("chain has no draws: " + path.string());
  return chain;
}

// Small helper for plot-ready CSV tables.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) {
    add_cells(header);
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    static_assert(sizeof...(Cells) > 0);
    std::vector<std::string> out;
    (out.push_back(cell(cells)), ...);
    add_cells(out);
  }

  void row_cells(const std::vector<std::string>& cells) { add_cells(cells); }

  const std::string& str() const { return text_; }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <class Int>
    requires std::is_integral_v<Int>
  static std::string cell(Int v) {
    return std::to_string(v);
  }

  void add_cells(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw DataError("csv row has wrong width");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

}  // namespace kdbirl
