#pragma once

#include <map>
#include <string>
#include <vector>

#include "davrp/tensor.hpp"

namespace davrp {

// Binary tensor container: magic, version, tensor count, then per tensor
// name, rank, dims and raw little-endian f32 data. A human-readable
// `<path>.meta` sidecar carries key=value metadata. Writes go through a
// temp file + rename so a crash never leaves a torn checkpoint behind.
void save_tensors(const std::string& path, const std::vector<const ta::Param<float>*>& tensors,
                  const std::map<std::string, std::string>& meta);

// Loads into the given params, matching by name; shapes must agree.
void load_tensors(const std::string& path, const std::vector<ta::Param<float>*>& tensors,
                  std::map<std::string, std::string>* meta_out = nullptr);

bool file_exists(const std::string& path);

// Parses a `key = value` sidecar written by save_tensors.
std::map<std::string, std::string> read_meta_file(const std::string& path);

}  // namespace davrp
