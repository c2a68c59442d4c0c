#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "jpt/nn/params.hpp"

// Weights container, all integers little-endian:
//
//   magic     8 bytes  "JPTWGT\0\1" (last byte is the format version)
//   header    u32 length + UTF-8 JSON (config echo)
//   count     u32
//   tensor *  u32 name length + name, u32 rows, u32 cols, rows*cols float32
//   checksum  u64 FNV-1a over every preceding byte
//
// Tensors are written in name order, so equal contents give equal files.
namespace jpt {

inline constexpr char kWeightsMagic[8] = {'J', 'P', 'T', 'W', 'G', 'T', '\0', '\1'};

struct WeightsFile {
  nlohmann::json header;
  ParamSet params;
  std::uint64_t checksum = 0;  // trailing checksum field
};

std::string serialize_weights(const nlohmann::json& header, const ParamSet& params);
WeightsFile deserialize_weights(const std::string& bytes, const std::string& source_name = "<memory>");

void save_weights(const std::string& path, const nlohmann::json& header, const ParamSet& params);
WeightsFile load_weights(const std::string& path);

}  // namespace jpt
