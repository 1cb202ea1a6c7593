// Copyright 2026 The TDA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tda/protocol.hpp"

#include <cmath>
#include <limits>
#include <type_traits>

#include "json.hpp"
#include "tda/error.hpp"

namespace tda {

using json = nlohmann::json;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEncodeOversize: return "EncodeOversize";
    case ErrorCode::kUnknownMessage: return "UnknownMessage";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kInvalidRegistration: return "InvalidRegistration";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kNoEligibleWorkers: return "NoEligibleWorkers";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kWorkloadError: return "WorkloadError";
    case ErrorCode::kMergeError: return "MergeError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kTransportError: return "TransportError";
  }
  return "Unknown";
}

std::string to_string(const Range& r) {
  return "[" + std::to_string(r.start) + "," + std::to_string(r.end) + ")";
}

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::kMalformedFrame, why);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

std::uint64_t get_u64(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned()) malformed(std::string("field '") + key + "' is not an unsigned integer");
  return v.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& j, const char* key) {
  std::uint64_t v = get_u64(j, key);
  if (v > std::numeric_limits<std::uint32_t>::max()) malformed(std::string("field '") + key + "' exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

double as_f64(const json& v, const char* what) {
  if (!v.is_number()) malformed(std::string(what) + " is not a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) malformed(std::string(what) + " is not finite");
  return d;
}

double get_f64(const json& j, const char* key) { return as_f64(field(j, key), key); }

std::string get_str(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) malformed(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

const json& get_obj(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_object()) malformed(std::string("field '") + key + "' is not an object");
  return v;
}

// --- composite values ------------------------------------------------------

json to_json(const Range& r) { return {{"start", r.start}, {"end", r.end}}; }

Range range_from(const json& j) {
  Range r{get_u64(j, "start"), get_u64(j, "end")};
  if (r.start > r.end) malformed("range start > end");
  return r;
}

json to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from(const json& j) {
  Matrix m;
  m.rows = get_u64(j, "rows");
  m.cols = get_u64(j, "cols");
  const json& data = field(j, "data");
  if (!data.is_array()) malformed("matrix data is not an array");
  if (m.cols != 0 && m.rows > std::numeric_limits<std::uint64_t>::max() / m.cols) malformed("matrix too large");
  if (data.size() != m.rows * m.cols) malformed("matrix data size mismatch");
  m.data.reserve(data.size());
  for (const json& v : data) m.data.push_back(as_f64(v, "matrix entry"));
  return m;
}

json to_json(const WorkloadSpec& w) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SearchSpec>) {
          return {{"kind", "search"}, {"pattern", s.pattern}};
        } else {
          return {{"kind", "matmul"}, {"a", to_json(s.a)}, {"b", to_json(s.b)}};
        }
      },
      w);
}

WorkloadSpec workload_from(const json& j) {
  std::string kind = get_str(j, "kind");
  if (kind == "search") {
    SearchSpec s{get_str(j, "pattern")};
    if (s.pattern.empty()) malformed("empty search pattern");
    return s;
  }
  if (kind == "matmul") {
    MatMulSpec s{matrix_from(get_obj(j, "a")), matrix_from(get_obj(j, "b"))};
    if (s.a.cols != s.b.rows) malformed("matmul inner dimensions disagree");
    return s;
  }
  malformed("unknown workload kind '" + kind + "'");
}

json to_json(const JobSpec& s) { return {{"workload", to_json(s.workload)}, {"size", s.size}}; }

JobSpec job_spec_from(const json& j) {
  JobSpec s{workload_from(get_obj(j, "workload")), get_u64(j, "size")};
  if (s.size == 0) malformed("job size is zero");
  return s;
}

json to_json(const Payload& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SearchPayload>) {
          json matches = json::array();
          for (const auto& m : v.matches) matches.push_back(json::array({m.id, m.key}));
          return {{"kind", "search"}, {"matches", std::move(matches)}};
        } else {
          return {{"kind", "matmul"}, {"rows", to_json(v.rows)}};
        }
      },
      p);
}

Payload payload_from(const json& j) {
  std::string kind = get_str(j, "kind");
  if (kind == "search") {
    const json& arr = field(j, "matches");
    if (!arr.is_array()) malformed("matches is not an array");
    SearchPayload out;
    out.matches.reserve(arr.size());
    for (const json& e : arr) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_string())
        malformed("bad search match entry");
      out.matches.push_back({e[0].get<std::uint64_t>(), e[1].get<std::string>()});
    }
    return out;
  }
  if (kind == "matmul") return MatMulPayload{matrix_from(get_obj(j, "rows"))};
  malformed("unknown payload kind '" + kind + "'");
}

json to_json(const ProgressMarker& p) {
  return {{"position", p.position}, {"digest", p.partial_payload_digest}};
}

ProgressMarker progress_from(const json& j) {
  return {get_u64(j, "position"), get_u64(j, "digest")};
}

// --- message table ---------------------------------------------------------

template <typename T>
constexpr std::string_view name_of();

#define TDA_MESSAGE_NAME(T) \
  template <>               \
  constexpr std::string_view name_of<msg::T>() { return #T; }
TDA_MESSAGE_NAME(Register)
TDA_MESSAGE_NAME(RegisterAck)
TDA_MESSAGE_NAME(Heartbeat)
TDA_MESSAGE_NAME(Probe)
TDA_MESSAGE_NAME(ProbeEcho)
TDA_MESSAGE_NAME(JobRequest)
TDA_MESSAGE_NAME(SubJobAssign)
TDA_MESSAGE_NAME(SubJobAccept)
TDA_MESSAGE_NAME(SubJobComplete)
TDA_MESSAGE_NAME(SubJobReject)
TDA_MESSAGE_NAME(RefusalRequest)
TDA_MESSAGE_NAME(RefusalGrant)
TDA_MESSAGE_NAME(RefusalDeny)
TDA_MESSAGE_NAME(ResultFragment)
TDA_MESSAGE_NAME(JobAccepted)
TDA_MESSAGE_NAME(JobFailed)
#undef TDA_MESSAGE_NAME

void fill(json& j, const msg::Register& m) { j["perf_param"] = m.perf_param; }
void fill(json& j, const msg::RegisterAck& m) { j["node_id"] = m.node_id.value; }
void fill(json& j, const msg::Heartbeat& m) {
  j["node_id"] = m.node_id.value;
  j["load"] = m.load;
}
void fill(json& j, const msg::Probe& m) { j["nonce"] = m.nonce; }
void fill(json& j, const msg::ProbeEcho& m) { j["nonce"] = m.nonce; }
void fill(json& j, const msg::JobRequest& m) {
  j["job_spec"] = to_json(m.job_spec);
  j["client_address"] = m.client_address;
}
void fill(json& j, const msg::SubJobAssign& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
  j["workload_spec"] = to_json(m.workload_spec);
  j["range"] = to_json(m.range);
  j["client_address"] = m.client_address;
}
void fill(json& j, const msg::SubJobAccept& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
}
void fill(json& j, const msg::SubJobComplete& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
  j["range"] = to_json(m.range);
}
void fill(json& j, const msg::SubJobReject& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
  j["reason"] = m.reason;
}
void fill(json& j, const msg::RefusalRequest& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
  j["progress_marker"] = to_json(m.progress_marker);
}
void fill(json& j, const msg::RefusalGrant& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
}
void fill(json& j, const msg::RefusalDeny& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
}
void fill(json& j, const msg::ResultFragment& m) {
  j["job_id"] = m.job_id;
  j["sub_id"] = m.sub_id;
  j["range"] = to_json(m.range);
  j["payload"] = to_json(m.payload);
}
void fill(json& j, const msg::JobAccepted& m) { j["job_id"] = m.job_id; }
void fill(json& j, const msg::JobFailed& m) {
  j["job_id"] = m.job_id;
  j["reason"] = m.reason;
}

template <typename T>
T parse_as(const json& j);

template <>
msg::Register parse_as(const json& j) {
  msg::Register m{get_f64(j, "perf_param")};
  if (!(m.perf_param > 0)) malformed("perf_param must be positive");
  return m;
}
template <>
msg::RegisterAck parse_as(const json& j) { return {NodeId{get_u64(j, "node_id")}}; }
template <>
msg::Heartbeat parse_as(const json& j) {
  msg::Heartbeat m{NodeId{get_u64(j, "node_id")}, get_f64(j, "load")};
  if (m.load < 0.0 || m.load > 1.0) malformed("load outside [0,1]");
  return m;
}
template <>
msg::Probe parse_as(const json& j) { return {get_u64(j, "nonce")}; }
template <>
msg::ProbeEcho parse_as(const json& j) { return {get_u64(j, "nonce")}; }
template <>
msg::JobRequest parse_as(const json& j) {
  return {job_spec_from(get_obj(j, "job_spec")), get_str(j, "client_address")};
}
template <>
msg::SubJobAssign parse_as(const json& j) {
  return {get_u64(j, "job_id"), get_u32(j, "sub_id"),
          workload_from(get_obj(j, "workload_spec")),
          range_from(get_obj(j, "range")), get_str(j, "client_address")};
}
template <>
msg::SubJobAccept parse_as(const json& j) { return {get_u64(j, "job_id"), get_u32(j, "sub_id")}; }
template <>
msg::SubJobComplete parse_as(const json& j) {
  return {get_u64(j, "job_id"), get_u32(j, "sub_id"), range_from(get_obj(j, "range"))};
}
template <>
msg::SubJobReject parse_as(const json& j) {
  return {get_u64(j, "job_id"), get_u32(j, "sub_id"), get_str(j, "reason")};
}
template <>
msg::RefusalRequest parse_as(const json& j) {
  return {get_u64(j, "job_id"), get_u32(j, "sub_id"), progress_from(get_obj(j, "progress_marker"))};
}
template <>
msg::RefusalGrant parse_as(const json& j) { return {get_u64(j, "job_id"), get_u32(j, "sub_id")}; }
template <>
msg::RefusalDeny parse_as(const json& j) { return {get_u64(j, "job_id"), get_u32(j, "sub_id")}; }
template <>
msg::ResultFragment parse_as(const json& j) {
  return {get_u64(j, "job_id"), get_u32(j, "sub_id"), range_from(get_obj(j, "range")),
          payload_from(get_obj(j, "payload"))};
}
template <>
msg::JobAccepted parse_as(const json& j) { return {get_u64(j, "job_id")}; }
template <>
msg::JobFailed parse_as(const json& j) { return {get_u64(j, "job_id"), get_str(j, "reason")}; }

template <std::size_t I = 0>
Message parse_variant(std::string_view type, const json& j) {
  if constexpr (I == std::variant_size_v<Message>) {
    throw Error(ErrorCode::kUnknownMessage, "unknown message type '" + std::string(type) + "'");
  } else {
    using T = std::variant_alternative_t<I, Message>;
    if (type == name_of<T>()) return parse_as<T>(j);
    return parse_variant<I + 1>(type, j);
  }
}

std::string dump_canonical(const json& j) {
  try {
    // nlohmann::json objects are std::map backed, so keys come out sorted.
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
  } catch (const json::type_error& e) {
    malformed(std::string("cannot serialise: ") + e.what());
  }
}

}  // namespace

std::string_view type_name(const Message& m) {
  return std::visit([](const auto& v) { return name_of<std::decay_t<decltype(v)>>(); }, m);
}

std::string encode_body(const Message& m) {
  json j = json::object();
  std::visit([&](const auto& v) { fill(j, v); }, m);
  j["type"] = std::string(type_name(m));
  return dump_canonical(j);
}

std::vector<std::uint8_t> encode_frame(const Message& m) {
  std::string body = encode_body(m);
  if (body.size() > kMaxFrameBody)
    throw Error(ErrorCode::kEncodeOversize, "frame body of " + std::to_string(body.size()) + " bytes");
  std::vector<std::uint8_t> out(4 + body.size());
  auto n = static_cast<std::uint32_t>(body.size());
  out[0] = static_cast<std::uint8_t>(n >> 24);
  out[1] = static_cast<std::uint8_t>(n >> 16);
  out[2] = static_cast<std::uint8_t>(n >> 8);
  out[3] = static_cast<std::uint8_t>(n);
  std::copy(body.begin(), body.end(), out.begin() + 4);
  return out;
}

Message decode_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    malformed(std::string("bad JSON: ") + e.what());
  }
  if (!j.is_object()) malformed("body is not a JSON object");
  std::string type = get_str(j, "type");
  try {
    return parse_variant(type, j);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
}

std::optional<Decoded> decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  std::uint32_t n = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                    (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  if (n > kMaxFrameBody) malformed("frame length " + std::to_string(n) + " exceeds limit");
  if (bytes.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string_view body(reinterpret_cast<const char*>(bytes.data() + 4), n);
  return Decoded{decode_body(body), 4 + std::size_t{n}};
}

void FrameReader::append(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  auto d = decode_frame(std::span(buffer_).subspan(offset_));
  if (!d) return std::nullopt;
  offset_ += d->consumed;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return std::move(d->message);
}

std::uint64_t payload_digest(const Payload& p) {
  std::string text = dump_canonical(to_json(p));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tda
