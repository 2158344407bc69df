// Copyright 2026 The ecstore Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Request/response contract shared by the simulated and socket transports.
//
// Every callback a transport invokes (replies, connects, timers) runs on
// that transport's single execution context, so code driven by one
// transport never sees concurrent callbacks.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "ecstore/common.hpp"
#include "ecstore/wire.hpp"

namespace ecstore {

/// Completion of one request: the reply frame, or a transport-level error.
using ReplyFn = std::function<void(Result<wire::Message>)>;

/// Sends the reply body for one request; call at most once.
using Responder = std::function<void(wire::Body)>;

class MessageHandler {
 public:
  virtual ~MessageHandler() = default;
  virtual void handle(const Address& from, const wire::Message& request, Responder respond) = 0;

  /// True when this request may be handled off the execution context,
  /// concurrently with anything else.
  virtual bool concurrent(const wire::Message&) const { return false; }
};

struct SendInfo {
  std::uint64_t request_id = 0;
  std::size_t bytes = 0;
};

struct TransportStats {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t messages_sent = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;

  virtual const Address& self() const = 0;

  /// Establishes (or models) a connection, including the version handshake.
  virtual void connect(const Address& to, std::function<void(Errc)> done) = 0;
  virtual void disconnect(const Address& to) = 0;

  virtual SendInfo request(const Address& to, wire::Body body, ReplyFn on_reply) = 0;

  /// Best effort. The reply callback will not run after this returns.
  virtual void cancel(const Address& to, std::uint64_t request_id) = 0;

  /// Milliseconds on this transport's clock (virtual in simulation).
  virtual double now_ms() const = 0;
  /// Wall-style timestamp for file metadata.
  virtual std::uint64_t timestamp_ms() const = 0;

  virtual void after(double delay_ms, std::function<void()> fn) = 0;

  /// Runs start on the execution context, then blocks until done() holds.
  virtual void run(const std::function<void()>& start, const std::function<bool()>& done) = 0;

  virtual TransportStats stats() const = 0;
};

/// Unwraps a reply of the expected body type. ErrorReply becomes its error;
/// any other body is a protocol error.
template <typename T>
Result<T> expect_reply(Result<wire::Message> reply) {
  if (!reply.ok()) return reply.error();
  auto& m = reply.value();
  if (auto* body = std::get_if<T>(&m.body)) return std::move(*body);
  if (auto* err = std::get_if<wire::ErrorReply>(&m.body))
    return Error(err->status.ok() ? Errc::protocol : err->status.code, err->status.detail);
  return Error(Errc::protocol, "unexpected " + std::string(wire::type_name(m.type())) + " reply");
}

/// Runs an asynchronous operation to completion on the given transport.
template <typename T, typename Start>
T run_sync(Transport& transport, Start&& start) {
  std::optional<Result<T>> out;
  transport.run([&] { start([&](Result<T> r) { out.emplace(std::move(r)); }); }, [&] { return out.has_value(); });
  return std::move(*out).value();
}

}  // namespace ecstore
