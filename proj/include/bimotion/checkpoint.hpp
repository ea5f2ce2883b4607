#pragma once

#include <cstdint>
#include <string>

#include "bimotion/nets.hpp"

namespace bimotion {

// Binary checkpoint: "BMRD" magic, format version, component tag, config and
// payload hashes, then named float64 arrays with explicit shapes,
// little-endian. load(save(m)) reproduces every parameter bitwise.
struct LoadedCheckpoint {
  std::string component;
  uint64_t config_hash = 0;
  uint64_t model_hash = 0;
  std::string meta_json;  // component dimensions, self-describing
  ParamStore params;
};

void save_checkpoint(const std::string& path, const std::string& component,
                     uint64_t config_hash, const std::string& meta_json,
                     const ParamStore& params);

// expect_component empty = accept any tag
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const std::string& expect_component = "");

}  // namespace bimotion
