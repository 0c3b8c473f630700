#pragma once

#include "peakcr/simharness.hpp"
#include "peakcr/welch.hpp"

#include <json.hpp>

#include <initializer_list>
#include <optional>
#include <string>

namespace peakcr::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// A JSON value plus its JSON pointer, so errors can say where they are.
class Node {
 public:
  Node(const json& j, std::string pointer) : j_(&j), ptr_(std::move(pointer)) {}

  const json& raw() const { return *j_; }
  const std::string& pointer() const { return ptr_; }
  bool has(const std::string& key) const;
  Node at(const std::string& key) const;
  Node at(std::size_t i) const;
  std::size_t size() const;

  /// Rejects keys outside `known`.
  void allow(std::initializer_list<const char*> known) const;

  double number() const;
  long long integer() const;
  bool boolean() const;
  std::string string() const;
  Vec vec() const;

  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;

  [[noreturn]] void fail(const std::string& what) const;

 private:
  const json* j_;
  std::string ptr_;
};

json load_json(const std::string& path);

/// Checks schema_version and the top-level keys.
Node root(const json& doc);

SignalSpec parse_signal(const Node& n);
NoiseSpec parse_noise(const Node& n);
SearchSpec parse_search(const Node& n);
CovOptions parse_covariance(const Node& n);
McConfig parse_mc(const Node& n);
WelchSpec parse_welch(const Node& n);
RegionMethod parse_method(const std::string& s);
RegionTarget parse_target(const std::string& s);
ExperimentConfig parse_experiment(const Node& top);

json to_json(const Vec& v);
json to_json(const Mat& m);
json to_json(const PeakEstimate& p);
json to_json(const ConfidenceEllipsoid& r);

}  // namespace peakcr::cli
