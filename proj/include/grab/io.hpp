#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grab/problems.hpp"
#include "grab/trainer.hpp"
#include "grab/vec.hpp"

namespace grab {

// Shortest round-trippable decimal for a double.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("truncated binary vector set");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

inline double parse_double(const std::string& field, const std::string& context) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0') || !std::isfinite(v)) {
    throw std::runtime_error("bad numeric field '" + field + "' in " + context);
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

inline constexpr char kVectorSetMagic[8] = {'G', 'R', 'A', 'B', 'V', 'E', 'C', '1'};

// --- vector sets -----------------------------------------------------------

inline void save_vector_set_csv(const VectorSet& set, const std::string& path) {
  auto out = detail::open_out(path);
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto row = set.row(i);
    for (std::size_t j = 0; j < set.dim(); ++j) {
      if (j) out << ',';
      out << fmt_double(row[j]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void save_vector_set_binary(const VectorSet& set, const std::string& path) {
  auto out = detail::open_out(path, true);
  out.write(kVectorSetMagic, 8);
  detail::put_u64_le(out, set.size());
  detail::put_u64_le(out, set.dim());
  for (double v : set.data()) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline VectorSet load_vector_set_csv(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<Vector> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    Vector row;
    for (const auto& f : detail::split_csv_line(line)) {
      row.push_back(detail::parse_double(f, path + ":" + std::to_string(lineno)));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("no vectors in " + path);
  return VectorSet::from_rows(rows);
}

inline VectorSet load_vector_set_binary(const std::string& path) {
  auto in = detail::open_in(path, true);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kVectorSetMagic, 8) != 0) {
    throw std::runtime_error("bad magic in " + path);
  }
  const std::uint64_t n = detail::get_u64_le(in);
  const std::uint64_t d = detail::get_u64_le(in);
  if (n == 0 || d == 0 || n > (1u << 24) || d > (1u << 24)) {
    throw std::runtime_error("unreasonable dimensions in " + path);
  }
  VectorSet set(n, d);
  for (auto& v : set.data()) v = std::bit_cast<double>(detail::get_u64_le(in));
  set.check_finite();
  return set;
}

// Sniffs the magic bytes, then falls back to CSV.
inline VectorSet load_vector_set(const std::string& path) {
  {
    auto in = detail::open_in(path, true);
    char magic[8] = {};
    in.read(magic, 8);
    if (in && std::memcmp(magic, kVectorSetMagic, 8) == 0) return load_vector_set_binary(path);
  }
  return load_vector_set_csv(path);
}

// --- permutations ----------------------------------------------------------

inline void save_permutation(const Permutation& perm, const std::string& path) {
  auto out = detail::open_out(path);
  out << "# perm n=" << perm.size() << '\n';
  for (std::size_t i = 0; i < perm.size(); ++i) out << perm[i] << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Permutation load_permutation(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<std::size_t> map;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    map.push_back(static_cast<std::size_t>(
        detail::parse_double(line, path)));  // integers survive exactly
  }
  if (map.empty()) throw std::runtime_error("no indices in " + path);
  return Permutation(std::move(map));
}

// --- training traces -------------------------------------------------------

inline void write_trace_csv(std::ostream& out, const TrainTrace& trace) {
  out << "# schema=1\n";
  out << "epoch,strategy,seed,loss,grad_norm,herding_obj,balance_bound,wall_ms\n";
  for (const auto& r : trace.records) {
    out << r.epoch << ',' << strategy_name(trace.strategy) << ',' << trace.seed << ','
        << fmt_double(r.loss) << ',' << fmt_double(r.grad_norm) << ','
        << fmt_double(r.herding_obj) << ','
        << (r.balance_bound ? fmt_double(*r.balance_bound) : std::string()) << ','
        << fmt_double(r.wall_ms) << '\n';
  }
}

inline void save_trace_csv(const TrainTrace& trace, const std::string& path) {
  auto out = detail::open_out(path);
  write_trace_csv(out, trace);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json trace_to_json(const TrainTrace& trace, const TrainConfig& cfg) {
  nlohmann::json j;
  j["schema"] = 1;
  j["strategy"] = strategy_name(trace.strategy);
  j["seed"] = trace.seed;
  j["config"] = {
      {"alpha", cfg.alpha},
      {"epochs", cfg.epochs},
      {"strategy", strategy_name(cfg.strategy)},
      {"momentum", cfg.momentum},
      {"seed", cfg.seed},
      {"herd_rounds", cfg.herd_rounds},
      {"stale_cap_bytes", cfg.stale_cap_bytes},
      {"record_herding", cfg.record_herding},
      {"balancer",
       {{"kind", cfg.balancer.kind == BalancerKind::Walk ? "walk" : "naive"},
        {"c", cfg.balancer.c},
        {"failure_policy",
         cfg.balancer.failure_policy == FailurePolicy::Abort ? "abort" : "restart_epoch"},
        {"max_restarts", cfg.balancer.max_restarts},
        {"rng_seed", cfg.balancer.rng_seed}}},
  };
  j["records"] = nlohmann::json::array();
  for (const auto& r : trace.records) {
    nlohmann::json rec = {
        {"epoch", r.epoch},         {"loss", r.loss},
        {"grad_norm", r.grad_norm}, {"herding_obj", r.herding_obj},
        {"wall_ms", r.wall_ms},     {"ordering_ops", r.ordering_ops},
    };
    if (r.balance_bound) rec["balance_bound"] = *r.balance_bound;
    j["records"].push_back(std::move(rec));
  }
  return j;
}

inline void save_trace_json(const TrainTrace& trace, const TrainConfig& cfg,
                            const std::string& path) {
  auto out = detail::open_out(path);
  out << trace_to_json(trace, cfg).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

// --- datasets --------------------------------------------------------------

// Header row with the final column named "label"; labels must be +/-1.
inline LogisticRegression load_logreg_csv(const std::string& path, double l2 = 0.0) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.empty() || header.back() != "label") {
    throw std::runtime_error("dataset header must end with a 'label' column: " + path);
  }
  const std::size_t d = header.size() - 1;
  if (d == 0) throw std::runtime_error("dataset has no feature columns: " + path);

  std::vector<Vector> features;
  std::vector<double> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != d + 1) {
      throw std::runtime_error("row " + std::to_string(lineno) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(d + 1) + ": " + path);
    }
    Vector row(d);
    const std::string context = path + ":" + std::to_string(lineno);
    for (std::size_t j = 0; j < d; ++j) row[j] = detail::parse_double(fields[j], context);
    features.push_back(std::move(row));
    labels.push_back(detail::parse_double(fields[d], context));
  }
  return LogisticRegression(std::move(features), std::move(labels), l2);
}

}  // namespace grab
