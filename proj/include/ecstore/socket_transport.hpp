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

// TCP transport.
//
// Callbacks, timers and non-concurrent handler calls run on one dispatcher
// thread owned by the transport. Each connection, inbound or outbound, has
// its own reader thread; requests a handler marks concurrent are served on
// the inbound reader thread directly. Addresses are "host:port".
//
// Cancelling a request aborts its connection when nothing else is
// outstanding on it, and otherwise sends a Cancel frame; either way the
// reply callback is dropped.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>

#include "ecstore/transport.hpp"

namespace ecstore {

struct SocketOptions {
  double connect_timeout_ms = 5000;
  double request_timeout_ms = 30000;
};

class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(Address self, SocketOptions options = {});
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  /// Binds self and starts accepting. Throws Errc::io when the address is
  /// taken.
  void listen(MessageHandler* handler);
  /// Closes every socket and joins every thread. Idempotent.
  void stop();

  const Address& self() const override { return self_; }
  void connect(const Address& to, std::function<void(Errc)> done) override;
  void disconnect(const Address& to) override;
  SendInfo request(const Address& to, wire::Body body, ReplyFn on_reply) override;
  void cancel(const Address& to, std::uint64_t request_id) override;
  double now_ms() const override;
  std::uint64_t timestamp_ms() const override;
  void after(double delay_ms, std::function<void()> fn) override;
  void run(const std::function<void()>& start, const std::function<bool()>& done) override;
  TransportStats stats() const override;

  /// Runs fn on the dispatcher thread.
  void post(std::function<void()> fn) { after(0, std::move(fn)); }

 private:
  struct Outbound;
  struct Inbound;
  struct Pending {
    ReplyFn on_reply;
    Address to;
  };
  struct Timer {
    std::chrono::steady_clock::time_point when;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct TimerLater {
    bool operator()(const Timer& a, const Timer& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };
  struct Waiter {
    const std::function<bool()>* done;
    bool satisfied = false;
  };

  void dispatch_loop();
  void start_connect(const Address& to);
  void send_pending(const std::shared_ptr<Outbound>& conn);
  void fail_connection(const std::shared_ptr<Outbound>& conn, const std::string& why);
  void read_replies(std::shared_ptr<Outbound> conn);
  void accept_loop();
  void serve(std::shared_ptr<Inbound> conn);
  void spawn(std::function<void()> fn);
  void check_waiters();

  Address self_;
  SocketOptions options_;
  std::chrono::steady_clock::time_point epoch_;

  // Dispatcher state.
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable waiters_cv_;
  std::priority_queue<Timer, std::vector<Timer>, TimerLater> timers_;
  std::uint64_t timer_seq_ = 0;
  std::list<Waiter*> waiters_;
  bool stopping_ = false;
  std::thread dispatcher_;
  std::thread::id dispatcher_id_;

  // Touched only on the dispatcher thread.
  std::map<Address, std::shared_ptr<Outbound>> outbound_;
  std::map<std::uint64_t, Pending> pending_;
  std::uint64_t next_id_ = 0;

  MessageHandler* handler_ = nullptr;
  int listen_fd_ = -1;

  std::mutex threads_mu_;
  std::list<std::thread> threads_;
  std::list<std::weak_ptr<Inbound>> inbound_;

  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> bytes_received_{0};
  std::atomic<std::uint64_t> messages_sent_{0};
};

/// Splits "host:port". Throws Errc::config.
std::pair<std::string, std::uint16_t> split_address(const Address& address);

}  // namespace ecstore
