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

#include "ecstore/sim_network.hpp"

#include <algorithm>
#include <cstdio>

namespace ecstore {

SimNetwork::SimNetwork(SimOptions options) : options_(options), rng_(options.latency.seed) {}

SimNetwork::~SimNetwork() {
  for (auto& [addr, ep] : endpoints_) ep.sink = nullptr;
}

SimNetwork::Endpoint& SimNetwork::endpoint(const Address& address) {
  auto it = endpoints_.find(address);
  if (it == endpoints_.end()) throw Error(Errc::routing, "unknown endpoint " + address);
  return it->second;
}

void SimNetwork::attach(const Address& address, MessageHandler* handler) {
  auto& ep = endpoints_[address];
  if (ep.handler != nullptr && ep.handler != handler)
    throw Error(Errc::config, "endpoint " + address + " already has a handler");
  ep.handler = handler;
}

std::unique_ptr<SimTransport> SimNetwork::make_transport(const Address& address) {
  return std::make_unique<SimTransport>(*this, address);
}

void SimNetwork::set_latency_override(const Address& address, LatencyModel model) {
  endpoints_[address].latency = model;
}

void SimNetwork::set_unreachable(const Address& address, bool unreachable) {
  endpoints_[address].unreachable = unreachable;
}

SimTransport* SimNetwork::sink(const Address& address) const {
  auto it = endpoints_.find(address);
  return it == endpoints_.end() ? nullptr : it->second.sink;
}

void SimNetwork::at(double time, std::function<void()> fn) {
  queue_.push(Event{std::max(time, now_), seq_++, std::move(fn)});
}

bool SimNetwork::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the function is moved out before pop.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.time;
  ev.fn();
  return true;
}

void SimNetwork::run() {
  while (step()) {
  }
}

bool SimNetwork::run_until(const std::function<bool()>& done) {
  while (!done()) {
    if (!step()) return false;
  }
  return true;
}

double SimNetwork::send(const Address& from, const Address& to, std::size_t bytes, std::function<void()> on_delivery) {
  auto& src = endpoint(from);
  auto& dst = endpoint(to);
  src.stats.bytes_sent += bytes;
  src.stats.messages_sent += 1;
  dst.stats.bytes_received += bytes;

  double arrival = now_;
  if (from != to) {
    const LatencyModel& m = src.latency ? *src.latency : options_.latency;
    const double jitter = m.jitter_ms > 0 ? normal_(rng_) * m.jitter_ms : 0.0;
    const double transmit = m.per_byte_ms * static_cast<double>(bytes);
    if (options_.contention) {
      const double depart = std::max(now_, src.busy_until) + transmit;
      src.busy_until = depart;
      arrival = depart + std::max(0.0, m.base_delay_ms + jitter);
    } else {
      arrival = now_ + std::max(0.0, m.base_delay_ms + transmit + jitter);
    }
  }
  auto& last = last_arrival_[{from, to}];
  arrival = std::max(arrival, last);
  last = arrival;
  at(arrival, std::move(on_delivery));
  return arrival;
}

void SimNetwork::deliver_request(const Address& from, const Address& to, const Bytes& frame) {
  auto decoded = wire::decode_message(frame);
  if (!decoded) return;
  wire::Message msg = std::move(decoded->message);
  auto& dst = endpoint(to);
  if (dst.unreachable || dst.handler == nullptr) {
    if (msg.type() == wire::MsgType::cancel) return;
    const auto rid = msg.request_id;
    // The failure travels back like an RST.
    send(to, from, 0, [this, from, rid, to] {
      if (auto* s = sink(from)) s->fail(rid, Error(Errc::transport, "endpoint " + to + " unreachable"));
    });
    return;
  }
  const auto rid = msg.request_id;
  Responder respond = [this, from, to, rid, replied = false](wire::Body body) mutable {
    if (replied) return;
    replied = true;
    Bytes reply = wire::encode_message(wire::Message{rid, std::move(body)});
    const std::size_t size = reply.size();
    send(to, from, size, [this, from, reply = std::move(reply)] { deliver_reply(from, reply); });
  };
  dst.handler->handle(from, msg, std::move(respond));
}

void SimNetwork::deliver_reply(const Address& to, const Bytes& frame) {
  auto* s = sink(to);
  if (s == nullptr) return;
  auto decoded = wire::decode_message(frame);
  if (!decoded) return;
  s->on_reply(std::move(decoded->message));
}

TransportStats SimNetwork::endpoint_stats(const Address& address) const {
  auto it = endpoints_.find(address);
  return it == endpoints_.end() ? TransportStats{} : it->second.stats;
}

TransportStats SimNetwork::total_stats() const {
  TransportStats total;
  for (const auto& [addr, ep] : endpoints_) {
    total.bytes_sent += ep.stats.bytes_sent;
    total.bytes_received += ep.stats.bytes_received;
    total.messages_sent += ep.stats.messages_sent;
  }
  return total;
}

SimTransport::SimTransport(SimNetwork& net, Address self) : net_(net), self_(std::move(self)) {
  auto& ep = net_.endpoints_[self_];
  if (ep.sink != nullptr) throw Error(Errc::config, "endpoint " + self_ + " already has a transport");
  ep.sink = this;
}

SimTransport::~SimTransport() {
  auto it = net_.endpoints_.find(self_);
  if (it != net_.endpoints_.end() && it->second.sink == this) it->second.sink = nullptr;
}

std::uint64_t SimTransport::timestamp_ms() const {
  return net_.options().epoch_ms + static_cast<std::uint64_t>(net_.now());
}

void SimTransport::connect(const Address& to, std::function<void(Errc)> done) {
  if (!net_.has_endpoint(to)) {
    net_.at(net_.now(), [done = std::move(done)] { done(Errc::routing); });
    return;
  }
  if (!net_.options().model_handshake || to == self_) {
    net_.at(net_.now(), [done = std::move(done)] { done(Errc::ok); });
    return;
  }
  // Version byte out, version byte back.
  net_.send(self_, to, 1, [net = &net_, self = self_, to, done = std::move(done)]() mutable {
    const bool reachable = !net->endpoint(to).unreachable;
    net->send(to, self, 1, [net, self, done = std::move(done), reachable] {
      if (net->sink(self) != nullptr) done(reachable ? Errc::ok : Errc::transport);
    });
  });
}

SendInfo SimTransport::request(const Address& to, wire::Body body, ReplyFn on_reply) {
  const std::uint64_t rid = ++next_id_;
  Bytes frame = wire::encode_message(wire::Message{rid, std::move(body)});
  SendInfo info{rid, frame.size()};
  if (!net_.has_endpoint(to)) {
    pending_.emplace(rid, std::move(on_reply));
    net_.at(net_.now(), [net = &net_, self = self_, rid, to] {
      if (auto* sink = net->sink(self)) sink->fail(rid, Error(Errc::routing, "unknown endpoint " + to));
    });
    return info;
  }
  pending_.emplace(rid, std::move(on_reply));
  const std::size_t size = frame.size();
  net_.send(self_, to, size, [net = &net_, to, from = self_, frame = std::move(frame)] { net->deliver_request(from, to, frame); });
  return info;
}

void SimTransport::cancel(const Address& to, std::uint64_t request_id) {
  if (pending_.erase(request_id) == 0) return;
  if (!net_.has_endpoint(to)) return;
  Bytes frame = wire::encode_message(wire::Message{++next_id_, wire::Cancel{request_id}});
  const std::size_t size = frame.size();
  net_.send(self_, to, size, [net = &net_, to, from = self_, frame = std::move(frame)] { net->deliver_request(from, to, frame); });
}

void SimTransport::after(double delay_ms, std::function<void()> fn) { net_.at(net_.now() + delay_ms, std::move(fn)); }

void SimTransport::run(const std::function<void()>& start, const std::function<bool()>& done) {
  start();
  if (!net_.run_until(done)) throw Error(Errc::transport, "simulation drained before the operation completed");
}

void SimTransport::on_reply(wire::Message reply) {
  auto it = pending_.find(reply.request_id);
  if (it == pending_.end()) return;  // cancelled or duplicate
  ReplyFn fn = std::move(it->second);
  pending_.erase(it);
  fn(std::move(reply));
}

void SimTransport::fail(std::uint64_t request_id, Error error) {
  auto it = pending_.find(request_id);
  if (it == pending_.end()) return;
  ReplyFn fn = std::move(it->second);
  pending_.erase(it);
  fn(std::move(error));
}

}  // namespace ecstore
