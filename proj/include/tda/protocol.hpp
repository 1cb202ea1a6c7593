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

// Messages exchanged between coordinator, workers and clients, and the
// frame codec shared by every transport.
//
// Frame layout (bit-exact):
//
//   +----------------------------+------------------------------+
//   | length: uint32 big-endian  | body: UTF-8 JSON, length B   |
//   +----------------------------+------------------------------+
//
// The body is a single JSON object whose "type" member names the message
// variant. Object keys are emitted in lexicographic order with no
// insignificant whitespace, so encoding is byte-deterministic. Bodies above
// kMaxFrameBody are rejected on both sides.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tda/types.hpp"
#include "tda/workload_types.hpp"

namespace tda {

inline constexpr std::size_t kMaxFrameBody = 16u * 1024u * 1024u;

/// Where a worker stopped inside its assigned range.
struct ProgressMarker {
  std::uint64_t position = 0;  // next unprocessed item
  std::uint64_t partial_payload_digest = 0;

  friend bool operator==(const ProgressMarker&, const ProgressMarker&) = default;
};

namespace msg {

struct Register {
  double perf_param = 0;
  friend bool operator==(const Register&, const Register&) = default;
};
struct RegisterAck {
  NodeId node_id;
  friend bool operator==(const RegisterAck&, const RegisterAck&) = default;
};
struct Heartbeat {
  NodeId node_id;
  double load = 0;
  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};
struct Probe {
  std::uint64_t nonce = 0;
  friend bool operator==(const Probe&, const Probe&) = default;
};
struct ProbeEcho {
  std::uint64_t nonce = 0;
  friend bool operator==(const ProbeEcho&, const ProbeEcho&) = default;
};
struct JobRequest {
  JobSpec job_spec;
  Address client_address;
  friend bool operator==(const JobRequest&, const JobRequest&) = default;
};
/// client_address is forwarded so the worker can return results directly.
struct SubJobAssign {
  JobId job_id = 0;
  SubId sub_id = 0;
  WorkloadSpec workload_spec;
  Range range;
  Address client_address;
  friend bool operator==(const SubJobAssign&, const SubJobAssign&) = default;
};
struct SubJobAccept {
  JobId job_id = 0;
  SubId sub_id = 0;
  friend bool operator==(const SubJobAccept&, const SubJobAccept&) = default;
};
/// Worker -> coordinator status notice: the fragment for this range has
/// been sent to the client. Carries no result data.
struct SubJobComplete {
  JobId job_id = 0;
  SubId sub_id = 0;
  Range range;
  friend bool operator==(const SubJobComplete&, const SubJobComplete&) = default;
};
/// Worker could not run or deliver the sub-job.
struct SubJobReject {
  JobId job_id = 0;
  SubId sub_id = 0;
  std::string reason;
  friend bool operator==(const SubJobReject&, const SubJobReject&) = default;
};
struct RefusalRequest {
  JobId job_id = 0;
  SubId sub_id = 0;
  ProgressMarker progress_marker;
  friend bool operator==(const RefusalRequest&, const RefusalRequest&) = default;
};
struct RefusalGrant {
  JobId job_id = 0;
  SubId sub_id = 0;
  friend bool operator==(const RefusalGrant&, const RefusalGrant&) = default;
};
struct RefusalDeny {
  JobId job_id = 0;
  SubId sub_id = 0;
  friend bool operator==(const RefusalDeny&, const RefusalDeny&) = default;
};
struct ResultFragment {
  JobId job_id = 0;
  SubId sub_id = 0;
  Range range;
  Payload payload;
  friend bool operator==(const ResultFragment&, const ResultFragment&) = default;
};
struct JobAccepted {
  JobId job_id = 0;
  friend bool operator==(const JobAccepted&, const JobAccepted&) = default;
};
struct JobFailed {
  JobId job_id = 0;
  std::string reason;
  friend bool operator==(const JobFailed&, const JobFailed&) = default;
};

}  // namespace msg

using Message =
    std::variant<msg::Register, msg::RegisterAck, msg::Heartbeat, msg::Probe,
                 msg::ProbeEcho, msg::JobRequest, msg::SubJobAssign,
                 msg::SubJobAccept, msg::SubJobComplete, msg::SubJobReject,
                 msg::RefusalRequest, msg::RefusalGrant, msg::RefusalDeny,
                 msg::ResultFragment, msg::JobAccepted, msg::JobFailed>;

/// Wire name of the variant held by m ("Register", "Heartbeat", ...).
std::string_view type_name(const Message& m);

/// Canonical JSON body, without the length prefix.
std::string encode_body(const Message& m);

/// Throws Error{kEncodeOversize} when the body exceeds kMaxFrameBody.
std::vector<std::uint8_t> encode_frame(const Message& m);

struct Decoded {
  Message message;
  std::size_t consumed = 0;  // bytes of input used by this frame
};

/// Decodes the first frame in bytes. Returns nullopt when the input does
/// not yet hold a complete frame. Throws Error{kUnknownMessage} for an
/// unrecognised "type" and Error{kMalformedFrame} for bad JSON, missing or
/// mistyped fields, invariant violations, or an oversize length prefix.
std::optional<Decoded> decode_frame(std::span<const std::uint8_t> bytes);

/// Parses a frame body (JSON text) into a message.
Message decode_body(std::string_view body);

/// Accumulates stream bytes and yields whole messages.
class FrameReader {
 public:
  void append(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

/// 64-bit FNV-1a over the canonical JSON of a payload.
std::uint64_t payload_digest(const Payload& p);

}  // namespace tda
