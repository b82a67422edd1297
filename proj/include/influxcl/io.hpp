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

#pragma once

// File formats shared by the library and the CLI: score CSVs, bucket CSVs,
// checkpoint JSON, policy logs and metric traces.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "influxcl/diffcore.hpp"

namespace influxcl {

struct ScoreTable;
struct BucketAssignment;
struct PolicyLog;

// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string stable_hash(const std::string& text);

// Shortest decimal that round-trips the double.
std::string format_double(double v);
// Full-precision scientific notation, e.g. 1.2345678901234567e-03.
std::string format_scientific(double v);

// id,score,method,mask,config_hash
void write_scores_csv(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_scores_csv(const std::filesystem::path& path);

// id,bucket
void write_buckets_csv(const BucketAssignment& a, const std::filesystem::path& path);
BucketAssignment read_buckets_csv(const std::filesystem::path& path);

// step,arm,reward_raw,reward_scaled,p0,...,p{K-1}
void write_policy_log_csv(const PolicyLog& log, const std::filesystem::path& path);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

// {spec, step, layout, values}
void write_checkpoint(const ModelSpec& spec, const Checkpoint& ckpt,
                      const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path, ModelSpec* spec = nullptr);

// Writes `text` only through a temporary file renamed into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace influxcl
