#include "jpt/backbone/external.hpp"

#include "jpt/util/binary_io.hpp"
#include "jpt/util/error.hpp"

namespace jpt {

namespace {

constexpr std::uint8_t kEncodeRequest = 1;

void put_matrix(std::string& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) binio::put<float>(out, static_cast<float>(m.data()[i]));
}

Matrix get_matrix(binio::Reader& r, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.get<float>();
  return m;
}

}  // namespace

std::string encode_request_frame(std::span<const int> token_ids, bool record_attention) {
  std::string out;
  binio::put<std::uint8_t>(out, kEncodeRequest);
  binio::put<std::uint8_t>(out, record_attention ? 1 : 0);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(token_ids.size()));
  for (int id : token_ids) binio::put<std::int32_t>(out, id);
  return out;
}

std::string encode_response_frame(const EncoderOutput& output) {
  std::string out;
  binio::put<std::uint8_t>(out, 0);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(output.hidden.rows()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(output.hidden.cols()));
  put_matrix(out, output.hidden);
  const std::size_t layers = output.attentions.size();
  const std::size_t heads = layers > 0 ? output.attentions[0].size() : 0;
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(layers));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(heads));
  for (const auto& layer : output.attentions) {
    if (layer.size() != heads) throw ModelError("ragged attention heads");
    for (const Matrix& a : layer) put_matrix(out, a);
  }
  return out;
}

std::string error_response_frame(const std::string& message) {
  std::string out;
  binio::put<std::uint8_t>(out, 1);
  binio::put_string(out, message);
  return out;
}

EncoderOutput decode_response_frame(const std::string& frame) {
  binio::Reader r(frame);
  try {
    if (r.get<std::uint8_t>() != 0) throw ModelError("external backbone: " + r.get_string());
    EncoderOutput out;
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    out.hidden = get_matrix(r, rows, cols);
    const auto layers = r.get<std::uint32_t>();
    const auto heads = r.get<std::uint32_t>();
    out.attentions.resize(layers);
    for (auto& layer : out.attentions) {
      for (std::uint32_t h = 0; h < heads; ++h) layer.push_back(get_matrix(r, rows, rows));
    }
    if (!r.done()) throw ModelError("external backbone: trailing bytes in response");
    return out;
  } catch (const DataError& e) {
    throw ModelError(std::string("external backbone: malformed response: ") + e.what());
  }
}

EncoderOutput RemoteEncoder::encode(std::span<const int> token_ids, bool record_attention) const {
  if (static_cast<int>(token_ids.size()) > max_seq_len_) {
    throw DataError("sequence of " + std::to_string(token_ids.size()) + " tokens exceeds the backbone limit of " +
                    std::to_string(max_seq_len_) + "; split the input into chunks");
  }
  net::UnixSocket s = net::UnixSocket::connect(socket_path_);
  net::write_frame(s, encode_request_frame(token_ids, record_attention));
  auto response = net::read_frame(s);
  if (!response) throw ModelError("external backbone closed the connection without answering");
  EncoderOutput out = decode_response_frame(*response);
  if (out.hidden.rows() != static_cast<Eigen::Index>(token_ids.size()) || out.hidden.cols() != hidden_size_) {
    throw ModelError("external backbone returned a " + std::to_string(out.hidden.rows()) + "x" +
                     std::to_string(out.hidden.cols()) + " hidden matrix, expected " +
                     std::to_string(token_ids.size()) + "x" + std::to_string(hidden_size_));
  }
  return out;
}

EncoderServer::EncoderServer(std::string socket_path, std::shared_ptr<const SequenceEncoder> encoder)
    : encoder_(std::move(encoder)), server_(std::move(socket_path), [this](const std::string& request) {
        try {
          binio::Reader r(request);
          if (r.get<std::uint8_t>() != kEncodeRequest) return error_response_frame("unknown request kind");
          const bool record = (r.get<std::uint8_t>() & 1) != 0;
          const auto n = r.get<std::uint32_t>();
          if (std::size_t{n} * 4 != r.remaining()) return error_response_frame("malformed encode request");
          std::vector<int> ids(n);
          for (int& id : ids) id = r.get<std::int32_t>();
          return encode_response_frame(encoder_->encode(ids, record));
        } catch (const Error& e) {
          return error_response_frame(e.what());
        }
      }) {}

}  // namespace jpt
