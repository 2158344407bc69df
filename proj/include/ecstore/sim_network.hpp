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

// Deterministic discrete-event network.
//
// One virtual clock, one event queue ordered by (time, insertion sequence).
// A message of b bytes sent at time t arrives at
//
//   t + max(0, base + per_byte * b + N(0, jitter))
//
// With contention enabled each sender serializes its transmissions: the
// per-byte part becomes a service time on the sender's link and the message
// departs only after everything queued before it. Messages between one pair
// of endpoints never overtake each other. Frames are really encoded and
// decoded on every hop.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <unordered_map>

#include "ecstore/transport.hpp"

namespace ecstore {

struct LatencyModel {
  double base_delay_ms = 0;
  double per_byte_ms = 0;
  double jitter_ms = 0;  // standard deviation
  std::uint64_t seed = 1;
};

struct SimOptions {
  LatencyModel latency;
  /// Serialize each endpoint's outgoing transmissions.
  bool contention = false;
  /// Charge a version-byte round trip on connect().
  bool model_handshake = true;
  /// Virtual time zero maps to this timestamp.
  std::uint64_t epoch_ms = 1'420'070'400'000ull;
};

class SimTransport;

class SimNetwork {
 public:
  explicit SimNetwork(SimOptions options = {});
  ~SimNetwork();
  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  /// Registers a server endpoint. The handler must outlive the network's
  /// use of it.
  void attach(const Address& address, MessageHandler* handler);
  /// A transport bound to address (registered if new).
  std::unique_ptr<SimTransport> make_transport(const Address& address);

  bool has_endpoint(const Address& address) const { return endpoints_.contains(address); }
  std::size_t endpoint_count() const { return endpoints_.size(); }

  /// Messages sent by address use this model instead of the default.
  void set_latency_override(const Address& address, LatencyModel model);
  /// Requests to an unreachable endpoint fail with Errc::transport.
  void set_unreachable(const Address& address, bool unreachable);

  double now() const { return now_; }
  const SimOptions& options() const { return options_; }

  void at(double time, std::function<void()> fn);
  bool step();
  void run();
  /// False when the queue drained before done() held.
  bool run_until(const std::function<bool()>& done);

  /// Schedules on_delivery at the modeled arrival time and returns it.
  double send(const Address& from, const Address& to, std::size_t bytes, std::function<void()> on_delivery);

  TransportStats endpoint_stats(const Address& address) const;
  TransportStats total_stats() const;
  std::size_t pending_events() const { return queue_.size(); }

 private:
  friend class SimTransport;

  struct Endpoint {
    MessageHandler* handler = nullptr;
    SimTransport* sink = nullptr;
    double busy_until = 0;
    TransportStats stats;
    std::optional<LatencyModel> latency;
    bool unreachable = false;
  };

  struct Event {
    double time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  Endpoint& endpoint(const Address& address);
  SimTransport* sink(const Address& address) const;
  void deliver_request(const Address& from, const Address& to, const Bytes& frame);
  void deliver_reply(const Address& to, const Bytes& frame);

  SimOptions options_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<Address, Endpoint> endpoints_;
  std::map<std::pair<Address, Address>, double> last_arrival_;
};

class SimTransport final : public Transport {
 public:
  SimTransport(SimNetwork& net, Address self);
  ~SimTransport() override;

  const Address& self() const override { return self_; }
  void connect(const Address& to, std::function<void(Errc)> done) override;
  void disconnect(const Address&) override {}
  SendInfo request(const Address& to, wire::Body body, ReplyFn on_reply) override;
  void cancel(const Address& to, std::uint64_t request_id) override;
  double now_ms() const override { return net_.now(); }
  std::uint64_t timestamp_ms() const override;
  void after(double delay_ms, std::function<void()> fn) override;
  void run(const std::function<void()>& start, const std::function<bool()>& done) override;
  TransportStats stats() const override { return net_.endpoint_stats(self_); }

  std::size_t outstanding() const { return pending_.size(); }

 private:
  friend class SimNetwork;

  void on_reply(wire::Message reply);
  void fail(std::uint64_t request_id, Error error);

  SimNetwork& net_;
  Address self_;
  std::uint64_t next_id_ = 0;
  std::unordered_map<std::uint64_t, ReplyFn> pending_;
};

}  // namespace ecstore
