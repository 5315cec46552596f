#include "patvcm/bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace patvcm {
namespace {

using nlohmann::json;

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

void send_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n <= 0) throw BridgeError(std::string("bridge send failed: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

// False on a clean EOF before the first byte.
bool recv_all(int fd, std::uint8_t* out, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = ::recv(fd, out + off, len - off, 0);
    if (n == 0 && off == 0) return false;
    if (n <= 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw BridgeError("bridge call timed out");
      throw BridgeError("bridge connection closed mid-frame");
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

std::optional<std::string> read_frame(int fd) {
  std::array<std::uint8_t, 4> len{};
  if (!recv_all(fd, len.data(), 4)) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{len[0]} << 24) | (len[1] << 16) | (len[2] << 8) | len[3];
  if (n == 0 || n > kBridgeMaxFrame) throw BridgeError("bridge frame length " + std::to_string(n) + " out of range");
  std::vector<std::uint8_t> frame(4 + n);
  std::copy(len.begin(), len.end(), frame.begin());
  if (!recv_all(fd, frame.data() + 4, n)) throw BridgeError("bridge connection closed mid-frame");
  return decode_frame(frame);
}

json box_json(const Box& b) { return json::array({b.x0, b.y0, b.w, b.h}); }
Box box_from(const json& j) { return Box{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>(), 0.0}; }

}  // namespace

std::vector<std::uint8_t> encode_frame(const std::string& body) {
  const std::uint32_t n = static_cast<std::uint32_t>(body.size() + 1);
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n), kBridgeVersion};
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::string decode_frame(const std::vector<std::uint8_t>& frame) {
  if (frame.size() < 5) throw BridgeError("bridge frame shorter than its header");
  const std::uint32_t n = (std::uint32_t{frame[0]} << 24) | (frame[1] << 16) | (frame[2] << 8) | frame[3];
  if (n + 4 != frame.size()) throw BridgeError("bridge frame length mismatch");
  if (frame[4] != kBridgeVersion) throw BridgeError("bridge protocol version " + std::to_string(frame[4]));
  return std::string(frame.begin() + 5, frame.end());
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t a = bytes[i];
    const std::uint32_t b = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t c = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t v = (a << 16) | (b << 8) | c;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < bytes.size() ? kAlphabet[v & 63] : '=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kAlphabet[i])] = i;
  if (text.size() % 4 != 0) throw BridgeError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + static_cast<std::size_t>(k)];
      int d = 0;
      if (ch == '=') {
        ++pad;
      } else {
        d = lut[static_cast<unsigned char>(ch)];
        if (d < 0 || pad > 0) throw BridgeError("invalid base64");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::string frame_to_p6_base64(const Frame& frame) {
  std::ostringstream head;
  head << "P6\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  const std::string h = head.str();
  std::vector<std::uint8_t> bytes(h.begin(), h.end());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      for (int c = 0; c < 3; ++c) bytes.push_back(frame.rgb[c](y, x));
    }
  }
  return base64_encode(bytes);
}

Frame frame_from_p6_base64(const std::string& text) {
  const auto bytes = base64_decode(text);
  std::string s(bytes.begin(), bytes.end());
  std::istringstream in(s);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw BridgeError("bad P6 payload");
  const auto off = static_cast<std::size_t>(in.tellg());
  if (bytes.size() != off + static_cast<std::size_t>(w) * h * 3) throw BridgeError("P6 payload size mismatch");
  Frame f(h, w);
  std::size_t k = off;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) f.rgb[c](y, x) = bytes[k++];
    }
  }
  return f;
}

std::vector<std::uint32_t> mask_to_rle(const Mask& m) {
  std::vector<std::uint32_t> runs;
  bool cur = false;
  std::uint32_t len = 0;
  for (Eigen::Index y = 0; y < m.rows(); ++y) {
    for (Eigen::Index x = 0; x < m.cols(); ++x) {
      if (m(y, x) != cur) {
        runs.push_back(len);
        cur = !cur;
        len = 0;
      }
      ++len;
    }
  }
  runs.push_back(len);
  return runs;
}

Mask mask_from_rle(const std::vector<std::uint32_t>& runs, int height, int width) {
  Mask m(height, width);
  const std::size_t total = static_cast<std::size_t>(height) * width;
  std::size_t pos = 0;
  bool cur = false;
  for (std::uint32_t r : runs) {
    if (pos + r > total) throw BridgeError("mask RLE overruns the frame");
    for (std::uint32_t k = 0; k < r; ++k, ++pos) m(static_cast<Eigen::Index>(pos) / width, static_cast<Eigen::Index>(pos) % width) = cur;
    cur = !cur;
  }
  if (pos != total) throw BridgeError("mask RLE does not cover the frame");
  return m;
}

Endpoint parse_endpoint(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw std::invalid_argument("bridge endpoint must be host:port, got '" + spec + "'");
  }
  const std::string port = spec.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || p <= 0 || p > 65535) throw std::invalid_argument("bad bridge port '" + port + "'");
  return {spec.substr(0, colon), static_cast<std::uint16_t>(p)};
}

std::optional<Endpoint> endpoint_from_env() {
  const char* v = std::getenv("PATVCM_BRIDGE");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return parse_endpoint(v);
}

BridgeClient::BridgeClient(Endpoint ep, std::chrono::seconds timeout) : ep_(std::move(ep)), timeout_(timeout) {}

BridgeClient::~BridgeClient() {
  if (fd_ >= 0) ::close(fd_);
}

void BridgeClient::connect() const {
  if (fd_ >= 0) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep_.port);
  if (::getaddrinfo(ep_.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw BridgeError("cannot resolve bridge host " + ep_.host);
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, &::freeaddrinfo);
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    timeval tv{static_cast<time_t>(timeout_.count()), 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      fd_ = fd;
      return;
    }
    ::close(fd);
  }
  throw BridgeError("cannot connect to bridge at " + ep_.host + ":" + port);
}

std::string BridgeClient::call(const std::string& body) const {
  connect();
  try {
    send_all(fd_, encode_frame(body));
    auto reply = read_frame(fd_);
    if (!reply) throw BridgeError("bridge closed the connection");
    return *reply;
  } catch (const BridgeError&) {
    ::close(fd_);
    fd_ = -1;
    throw;
  }
}

namespace {

json request(std::uint64_t id, const char* capability) { return json{{"request_id", id}, {"capability", capability}}; }

json checked_call(const BridgeClient& c, const json& req) {
  const json resp = json::parse(c.call(req.dump()));
  if (resp.value("request_id", std::uint64_t{0}) != req.at("request_id").get<std::uint64_t>()) {
    throw BridgeError("bridge response id does not match the request");
  }
  if (!resp.value("ok", false)) throw BridgeError("bridge error: " + resp.value("error", std::string("unknown")));
  return resp;
}

}  // namespace

unsigned BridgeClient::capabilities() const {
  return checked_call(*this, request(next_id_++, "capabilities")).at("capabilities").get<unsigned>();
}

FrameDetections BridgeClient::detect(const Frame& frame) const {
  json req = request(next_id_++, "detect");
  req["image"] = frame_to_p6_base64(frame);
  const json resp = checked_call(*this, req);
  FrameDetections out;
  for (const json& b : resp.at("boxes")) {
    Box box = box_from(b);
    box.confidence = b.at(4).get<double>();
    out.push_back(box);
  }
  return out;
}

Mask BridgeClient::segment(const Frame& frame, const Box& box, std::span<const PromptPoint> points) const {
  json req = request(next_id_++, "segment");
  req["image"] = frame_to_p6_base64(frame);
  req["box"] = box_json(box);
  json pts = json::array();
  for (const PromptPoint& p : points) pts.push_back(json::array({p.at.x, p.at.y, p.positive ? 1 : 0}));
  req["points"] = pts;
  const json resp = checked_call(*this, req);
  return mask_from_rle(resp.at("mask").get<std::vector<std::uint32_t>>(), frame.height(), frame.width());
}

Mask BridgeClient::segment_with_caption(const Frame& frame, const Box& box, const std::string& caption) const {
  json req = request(next_id_++, "segment");
  req["image"] = frame_to_p6_base64(frame);
  req["box"] = box_json(box);
  req["params"] = json{{"caption", caption}};
  const json resp = checked_call(*this, req);
  return mask_from_rle(resp.at("mask").get<std::vector<std::uint32_t>>(), frame.height(), frame.width());
}

DepthMap BridgeClient::depth(const Frame& frame) const {
  json req = request(next_id_++, "depth");
  req["image"] = frame_to_p6_base64(frame);
  const json resp = checked_call(*this, req);
  const auto bytes = base64_decode(resp.at("depth").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(frame.height()) * frame.width() * 4) {
    throw BridgeError("depth payload size mismatch");
  }
  DepthMap d(frame.height(), frame.width());
  for (std::size_t k = 0; k < bytes.size() / 4; ++k) {
    const std::uint32_t bits = bytes[4 * k] | (bytes[4 * k + 1] << 8) | (bytes[4 * k + 2] << 16) |
                               (std::uint32_t{bytes[4 * k + 3]} << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    d(static_cast<Eigen::Index>(k) / frame.width(), static_cast<Eigen::Index>(k) % frame.width()) = v;
  }
  return d;
}

int BridgeClient::classify(const Frame& frame, const Box& box) const {
  json req = request(next_id_++, "classify");
  req["image"] = frame_to_p6_base64(frame);
  req["box"] = box_json(box);
  return checked_call(*this, req).at("class_id").get<int>();
}

std::vector<Keypoint> BridgeClient::pose(const Frame& frame, const Box& box) const {
  json req = request(next_id_++, "pose");
  req["image"] = frame_to_p6_base64(frame);
  req["box"] = box_json(box);
  const json resp = checked_call(*this, req);
  std::vector<Keypoint> out;
  for (const json& k : resp.at("keypoints")) out.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
  return out;
}

std::string BridgeClient::caption(const Frame& frame, const Box& box) const {
  json req = request(next_id_++, "caption");
  req["image"] = frame_to_p6_base64(frame);
  req["box"] = box_json(box);
  return checked_call(*this, req).at("caption").get<std::string>();
}

std::string answer_request(const std::string& body, const TaskModel& model) {
  json resp;
  try {
    const json req = json::parse(body);
    resp["request_id"] = req.at("request_id");
    const std::string cap = req.at("capability").get<std::string>();
    if (cap == "capabilities") {
      resp["capabilities"] = model.capabilities();
    } else {
      const Frame frame = frame_from_p6_base64(req.at("image").get<std::string>());
      if (cap == "detect") {
        json boxes = json::array();
        for (const Box& b : model.detect(frame)) boxes.push_back(json::array({b.x0, b.y0, b.w, b.h, b.confidence}));
        resp["boxes"] = boxes;
      } else if (cap == "segment") {
        const Box box = box_from(req.at("box"));
        Mask m;
        if (req.contains("params") && req["params"].contains("caption")) {
          m = model.segment_with_caption(frame, box, req["params"]["caption"].get<std::string>());
        } else {
          std::vector<PromptPoint> pts;
          for (const json& p : req.value("points", json::array())) {
            pts.push_back({Point{p.at(0).get<int>(), p.at(1).get<int>()}, p.at(2).get<int>() != 0});
          }
          m = model.segment(frame, box, pts);
        }
        resp["mask"] = mask_to_rle(m);
      } else if (cap == "depth") {
        const DepthMap d = model.depth(frame);
        std::vector<std::uint8_t> bytes;
        bytes.reserve(static_cast<std::size_t>(d.size()) * 4);
        for (Eigen::Index y = 0; y < d.rows(); ++y) {
          for (Eigen::Index x = 0; x < d.cols(); ++x) {
            std::uint32_t bits;
            const float v = d(y, x);
            std::memcpy(&bits, &v, 4);
            for (int s = 0; s < 32; s += 8) bytes.push_back(static_cast<std::uint8_t>(bits >> s));
          }
        }
        resp["depth"] = base64_encode(bytes);
      } else if (cap == "classify") {
        resp["class_id"] = model.classify(frame, box_from(req.at("box")));
      } else if (cap == "pose") {
        json kps = json::array();
        for (const Keypoint& k : model.pose(frame, box_from(req.at("box")))) kps.push_back(json::array({k.x, k.y}));
        resp["keypoints"] = kps;
      } else if (cap == "caption") {
        resp["caption"] = model.caption(frame, box_from(req.at("box")));
      } else {
        throw std::invalid_argument("unsupported capability '" + cap + "'");
      }
    }
    resp["ok"] = true;
  } catch (const std::exception& e) {
    resp["ok"] = false;
    resp["error"] = e.what();
  }
  return resp.dump();
}

struct LoopbackResponder::Impl {
  const TaskModel& model;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::thread worker;

  explicit Impl(const TaskModel& m) : model(m) {}

  void serve() {
    while (!stopping) {
      pollfd p{listen_fd, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      try {
        while (!stopping) {
          pollfd q{fd, POLLIN, 0};
          if (::poll(&q, 1, 50) <= 0) continue;
          auto body = read_frame(fd);
          if (!body) break;
          send_all(fd, encode_frame(answer_request(*body, model)));
        }
      } catch (const BridgeError&) {
      }
      ::close(fd);
    }
  }
};

LoopbackResponder::LoopbackResponder(const TaskModel& model) : impl_(std::make_unique<Impl>(model)) {
  impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (impl_->listen_fd < 0) throw BridgeError("cannot create responder socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(impl_->listen_fd, 4) != 0) {
    ::close(impl_->listen_fd);
    throw BridgeError("cannot bind responder socket");
  }
  socklen_t len = sizeof addr;
  ::getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  impl_->worker = std::thread([this] { impl_->serve(); });
}

void LoopbackResponder::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  if (impl_->worker.joinable()) impl_->worker.join();
  ::close(impl_->listen_fd);
}

LoopbackResponder::~LoopbackResponder() { stop(); }

}  // namespace patvcm
