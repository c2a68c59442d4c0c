#include "jpt/nn/weights_io.hpp"

#include <cstring>

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {

std::string serialize_weights(const nlohmann::json& header, const ParamSet& params) {
  std::string out(kWeightsMagic, sizeof(kWeightsMagic));
  binio::put_string(out, header.dump());
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, m] : params.tensors()) {
    binio::put_string(out, name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) binio::put<float>(out, static_cast<float>(m.data()[i]));
  }
  binio::put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

WeightsFile deserialize_weights(const std::string& bytes, const std::string& source_name) {
  if (bytes.size() < sizeof(kWeightsMagic) + 8 || std::memcmp(bytes.data(), kWeightsMagic, 6) != 0) {
    throw ModelError(source_name + ": not a weights file (bad magic)");
  }
  if (std::memcmp(bytes.data(), kWeightsMagic, sizeof(kWeightsMagic)) != 0) {
    throw ModelError(source_name + ": unsupported weights format version " +
                     std::to_string(static_cast<unsigned char>(bytes[7])));
  }
  const std::size_t body = bytes.size() - 8;
  WeightsFile out;
  try {
    binio::Reader tail(bytes.data() + body, 8);
    out.checksum = tail.get<std::uint64_t>();
    if (out.checksum != fnv1a64(std::string_view(bytes.data(), body))) {
      throw ModelError(source_name + ": weights checksum mismatch (file is corrupt or truncated)");
    }
    binio::Reader r(bytes.data() + sizeof(kWeightsMagic), body - sizeof(kWeightsMagic));
    out.header = nlohmann::json::parse(r.get_string());
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < count; ++t) {
      std::string name = r.get_string();
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(r.get<float>());
      out.params.add(name, std::move(m));
    }
    if (!r.done()) throw ModelError(source_name + ": trailing bytes after the last tensor");
  } catch (const DataError& e) {
    throw ModelError(source_name + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(source_name + ": bad weights header: " + e.what());
  }
  return out;
}

void save_weights(const std::string& path, const nlohmann::json& header, const ParamSet& params) {
  binio::write_file(path, serialize_weights(header, params));
}

WeightsFile load_weights(const std::string& path) {
  std::string bytes;
  try {
    bytes = binio::read_file(path);
  } catch (const DataError& e) {
    throw ModelError(e.what());
  }
  return deserialize_weights(bytes, path);
}

}  // namespace jpt
