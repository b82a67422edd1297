// Copyright 2026 The influxcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "influxcl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "influxcl/autocl.hpp"
#include "influxcl/errors.hpp"
#include "influxcl/influence.hpp"
#include "influxcl/ranking.hpp"

namespace influxcl {

using nlohmann::json;

std::string stable_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) { return json(v).dump(); }

std::string format_scientific(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected integer, got '" + s + "'", line);
  }
}

double parse_real(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected number, got '" + s + "'", line);
  }
}

}  // namespace

void write_scores_csv(const ScoreTable& table, const std::filesystem::path& path) {
  std::string out = "id,score,method,mask,config_hash\n";
  const std::string method = to_string(table.method);
  const std::string mask = to_string(table.mask);
  for (const auto& e : table.entries) {
    out += std::to_string(e.id) + ',' + format_scientific(e.score) + ',' + method +
           ',' + mask + ',' + table.config_hash + '\n';
  }
  write_text_file(path, out);
}

ScoreTable read_scores_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{
          "id", "score", "method", "mask", "config_hash"}) {
    throw ParseError("bad score file header in " + path.string(), 1);
  }
  ScoreTable t;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw ParseError("expected 5 columns", lineno);
    if (first) {
      try {
        t.method = score_method_from_string(f[2]);
        t.mask = selector_from_string(f[3]);
      } catch (const ArgumentError& e) {
        throw ParseError(e.what(), lineno);
      }
      t.config_hash = f[4];
      first = false;
    }
    t.entries.push_back({parse_int(f[0], lineno), parse_real(f[1], lineno)});
  }
  t.canonicalize();
  return t;
}

void write_buckets_csv(const BucketAssignment& a, const std::filesystem::path& path) {
  std::string out = "id,bucket\n";
  for (const auto& [id, b] : a.bucket_of) {
    out += std::to_string(id) + ',' + std::to_string(b) + '\n';
  }
  write_text_file(path, out);
}

BucketAssignment read_buckets_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"id", "bucket"}) {
    throw ParseError("bad bucket file header in " + path.string(), 1);
  }
  BucketAssignment a;
  int max_bucket = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw ParseError("expected 2 columns", lineno);
    const auto b = static_cast<int>(parse_int(f[1], lineno));
    if (b < 0) throw ParseError("negative bucket index", lineno);
    if (!a.bucket_of.emplace(parse_int(f[0], lineno), b).second) {
      throw ParseError("duplicate id", lineno);
    }
    max_bucket = std::max(max_bucket, b);
  }
  a.K = max_bucket + 1;
  return a;
}

void write_policy_log_csv(const PolicyLog& log, const std::filesystem::path& path) {
  std::string out = "step,arm,reward_raw,reward_scaled";
  for (int a = 0; a < log.K; ++a) out += ",p" + std::to_string(a);
  out += '\n';
  for (const auto& r : log.rows) {
    out += std::to_string(r.step) + ',' + std::to_string(r.arm) + ',' +
           format_double(r.reward_raw) + ',' + format_double(r.reward_scaled);
    for (double p : r.policy) out += ',' + format_double(p);
    out += '\n';
  }
  write_text_file(path, out);
}

std::string model_spec_to_json(const ModelSpec& spec) {
  json j;
  j["input_dim"] = spec.input_dim;
  j["hidden_widths"] = spec.hidden_widths;
  j["num_classes"] = spec.num_classes;
  j["activation"] = to_string(spec.activation);
  return j.dump();
}

namespace {

ModelSpec spec_from(const json& j) {
  ModelSpec s;
  s.input_dim = j.at("input_dim").get<Eigen::Index>();
  s.hidden_widths = j.at("hidden_widths").get<std::vector<Eigen::Index>>();
  s.num_classes = j.at("num_classes").get<Eigen::Index>();
  s.activation = activation_from_string(j.at("activation").get<std::string>());
  s.validate();
  return s;
}

}  // namespace

ModelSpec model_spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad model spec: ") + e.what());
  }
}

void write_checkpoint(const ModelSpec& spec, const Checkpoint& ckpt,
                      const std::filesystem::path& path) {
  json j;
  j["spec"] = json::parse(model_spec_to_json(spec));
  j["step"] = ckpt.step;
  json layout = json::array();
  for (const auto& s : ckpt.params.layout) {
    layout.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
  }
  j["layout"] = layout;
  j["values"] = std::vector<double>(ckpt.params.values.data(),
                                    ckpt.params.values.data() + ckpt.params.values.size());
  j["metrics"] = {{"train_loss", ckpt.train_loss},
                  {"dev_loss", ckpt.dev_loss},
                  {"dev_accuracy", ckpt.dev_accuracy}};
  write_text_file(path, j.dump() + "\n");
}

Checkpoint read_checkpoint(const std::filesystem::path& path, ModelSpec* spec_out) {
  const std::string text = read_text_file(path);
  try {
    const json j = json::parse(text);
    const ModelSpec spec = spec_from(j.at("spec"));
    Checkpoint c;
    c.step = j.at("step").get<std::int64_t>();
    for (const auto& s : j.at("layout")) {
      c.params.layout.push_back({s.at("name").get<std::string>(),
                                 s.at("offset").get<Eigen::Index>(),
                                 s.at("length").get<Eigen::Index>()});
    }
    const auto values = j.at("values").get<std::vector<double>>();
    c.params.values = Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size()));
    check_layout(c.params.layout, c.params.values.size());
    if (c.params.layout != layout_for(spec)) {
      throw ShapeError("checkpoint layout does not match its spec");
    }
    if (auto m = j.find("metrics"); m != j.end()) {
      c.train_loss = m->value("train_loss", 0.0);
      c.dev_loss = m->value("dev_loss", 0.0);
      c.dev_accuracy = m->value("dev_accuracy", 0.0);
    }
    if (spec_out) *spec_out = spec;
    return c;
  } catch (const json::exception& e) {
    throw ParseError("bad checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace influxcl
