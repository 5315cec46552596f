#pragma once

#include <chrono>
#include <memory>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "patvcm/task_model.hpp"

namespace patvcm {

inline constexpr std::uint8_t kBridgeVersion = 1;
inline constexpr std::uint32_t kBridgeMaxFrame = 64u << 20;

class BridgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire frame: u32 big-endian length of what follows, a version byte, then
// the UTF-8 JSON body.
std::vector<std::uint8_t> encode_frame(const std::string& body);
// Returns the body; throws BridgeError on a version or length mismatch.
std::string decode_frame(const std::vector<std::uint8_t>& frame);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Message bodies shared by client and responder.
std::string frame_to_p6_base64(const Frame& frame);
Frame frame_from_p6_base64(const std::string& text);
// Runs of alternating false/true pixels in raster order, starting with false.
std::vector<std::uint32_t> mask_to_rle(const Mask& m);
Mask mask_from_rle(const std::vector<std::uint32_t>& runs, int height, int width);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};
// "host:port"; throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& spec);
// From PATVCM_BRIDGE when set and non-empty.
std::optional<Endpoint> endpoint_from_env();

// TaskModel whose calls are answered by a remote responder over TCP, one
// request in flight at a time. Failures and timeouts raise BridgeError.
class BridgeClient final : public TaskModel {
 public:
  explicit BridgeClient(Endpoint ep, std::chrono::seconds timeout = std::chrono::seconds(60));
  ~BridgeClient() override;
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  unsigned capabilities() const override;
  FrameDetections detect(const Frame& frame) const override;
  Mask segment(const Frame& frame, const Box& box, std::span<const PromptPoint> points) const override;
  Mask segment_with_caption(const Frame& frame, const Box& box, const std::string& caption) const override;
  DepthMap depth(const Frame& frame) const override;
  int classify(const Frame& frame, const Box& box) const override;
  std::vector<Keypoint> pose(const Frame& frame, const Box& box) const override;
  std::string caption(const Frame& frame, const Box& box) const override;

  // Sends a raw JSON body and returns the raw response body.
  std::string call(const std::string& body) const;

 private:
  void connect() const;

  Endpoint ep_;
  std::chrono::seconds timeout_;
  mutable int fd_ = -1;
  mutable std::uint64_t next_id_ = 1;
};

// Answers one request body with `model`, as a responder would.
std::string answer_request(const std::string& body, const TaskModel& model);

// Minimal blocking responder on 127.0.0.1 for tests: serves connections
// until stop() is called.
class LoopbackResponder {
 public:
  explicit LoopbackResponder(const TaskModel& model);
  ~LoopbackResponder();
  LoopbackResponder(const LoopbackResponder&) = delete;
  LoopbackResponder& operator=(const LoopbackResponder&) = delete;

  Endpoint endpoint() const { return {"127.0.0.1", port_}; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

}  // namespace patvcm
