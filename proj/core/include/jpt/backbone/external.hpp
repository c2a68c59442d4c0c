#pragma once

#include <memory>
#include <span>
#include <string>

#include "jpt/backbone/transformer.hpp"
#include "jpt/util/socket.hpp"

// Wire contract for backbones that run out of process. One request frame per
// call, little-endian:
//
//   request   u8 kind = 1, u8 flags (bit 0: record attention),
//             u32 n, n x i32 token ids
//   response  u8 status; status 0: u32 L, u32 d, L*d float32 hidden (row-major),
//             u32 layers, u32 heads, layers*heads*L*L float32 attentions;
//             status 1: u32 length + UTF-8 error message
namespace jpt {

std::string encode_request_frame(std::span<const int> token_ids, bool record_attention);
std::string encode_response_frame(const EncoderOutput& output);
std::string error_response_frame(const std::string& message);
EncoderOutput decode_response_frame(const std::string& frame);

// Client side: one connection per call, so concurrent calls are safe.
class RemoteEncoder : public SequenceEncoder {
 public:
  RemoteEncoder(std::string socket_path, int hidden_size, int max_seq_len)
      : socket_path_(std::move(socket_path)), hidden_size_(hidden_size), max_seq_len_(max_seq_len) {}

  EncoderOutput encode(std::span<const int> token_ids, bool record_attention) const override;
  int hidden_size() const override { return hidden_size_; }
  int max_seq_len() const override { return max_seq_len_; }

 private:
  std::string socket_path_;
  int hidden_size_;
  int max_seq_len_;
};

// Serves any SequenceEncoder over the wire contract.
class EncoderServer {
 public:
  EncoderServer(std::string socket_path, std::shared_ptr<const SequenceEncoder> encoder);
  void start() { server_.start(); }
  void stop() { server_.stop(); }

 private:
  std::shared_ptr<const SequenceEncoder> encoder_;
  net::FrameServer server_;
};

}  // namespace jpt
