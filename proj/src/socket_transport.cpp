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

#include "ecstore/socket_transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <iostream>
#include <set>

namespace ecstore {

namespace {

using Clock = std::chrono::steady_clock;

bool write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) return false;
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool wait_readable(int fd, double timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  int rc;
  do {
    rc = ::poll(&p, 1, static_cast<int>(timeout_ms));
  } while (rc < 0 && errno == EINTR);
  return rc > 0;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

// Connects and exchanges version bytes. Returns the fd or -1 with why set.
int dial(const Address& to, double timeout_ms, std::string& why) {
  std::pair<std::string, std::uint16_t> hp;
  try {
    hp = split_address(to);
  } catch (const Error& e) {
    why = e.what();
    return -1;
  }
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(hp.second);
  if (int rc = ::getaddrinfo(hp.first.c_str(), port.c_str(), &hints, &res); rc != 0) {
    why = std::string("resolve ") + to + ": " + ::gai_strerror(rc);
    return -1;
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc < 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, static_cast<int>(timeout_ms)) > 0 ? 0 : -1;
      int err = 0;
      socklen_t len = sizeof(err);
      if (rc == 0 && (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0)) {
        errno = err;
        rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      break;
    }
    why = "connect " + to + ": " + std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) return -1;
  set_nodelay(fd);
  std::uint8_t version = wire::kProtocolVersion;
  std::uint8_t echoed = 0;
  if (!write_all(fd, &version, 1) || !wait_readable(fd, timeout_ms) || !read_exact(fd, &echoed, 1) ||
      echoed != wire::kProtocolVersion) {
    why = "handshake with " + to + " failed";
    ::close(fd);
    return -1;
  }
  return fd;
}

enum class FrameStatus { ok, closed, bad_length };

// Reads one whole frame into out.
FrameStatus read_frame(int fd, Bytes& out) {
  std::uint8_t header[4];
  if (!read_exact(fd, header, 4)) return FrameStatus::closed;
  const std::uint32_t len = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                            (std::uint32_t{header[2]} << 8) | header[3];
  if (len < wire::kHeaderSize || len > wire::kMaxFrame) return FrameStatus::bad_length;
  out.resize(len);
  std::memcpy(out.data(), header, 4);
  if (!read_exact(fd, out.data() + 4, len - 4)) return FrameStatus::closed;
  return FrameStatus::ok;
}

std::uint64_t frame_request_id(const Bytes& frame) {
  std::uint64_t rid = 0;
  for (int i = 0; i < 8; ++i) rid = (rid << 8) | frame[5 + i];
  return rid;
}

}  // namespace

std::pair<std::string, std::uint16_t> split_address(const Address& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Error(Errc::config, "address '" + address + "' is not host:port");
  unsigned port = 0;
  const char* first = address.data() + colon + 1;
  const char* last = address.data() + address.size();
  auto [p, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || p != last || port > 65535)
    throw Error(Errc::config, "address '" + address + "' has a bad port");
  std::string host = address.substr(0, colon);
  if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return {host, static_cast<std::uint16_t>(port)};
}

struct SocketTransport::Outbound {
  enum class State { connecting, open, closed };

  explicit Outbound(Address a) : to(std::move(a)) {}
  ~Outbound() {
    if (fd >= 0) ::close(fd);
  }

  Address to;
  int fd = -1;
  State state = State::connecting;
  int users = 0;
  std::vector<std::function<void(Errc)>> connect_waiters;
  std::vector<std::pair<std::uint64_t, Bytes>> queued;
  std::set<std::uint64_t> outstanding;
  std::mutex write_mu;
};

struct SocketTransport::Inbound {
  Inbound(int f, Address p) : fd(f), peer(std::move(p)) {}
  ~Inbound() { ::close(fd); }

  int fd;
  Address peer;
  std::mutex write_mu;
};

SocketTransport::SocketTransport(Address self, SocketOptions options)
    : self_(std::move(self)), options_(options), epoch_(Clock::now()) {
  dispatcher_ = std::thread([this] { dispatch_loop(); });
  dispatcher_id_ = dispatcher_.get_id();
}

SocketTransport::~SocketTransport() { stop(); }

void SocketTransport::spawn(std::function<void()> fn) {
  std::lock_guard lock(threads_mu_);
  threads_.emplace_back(std::move(fn));
}

void SocketTransport::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && !dispatcher_.joinable()) return;
    stopping_ = true;
  }
  cv_.notify_all();
  waiters_cv_.notify_all();
  if (dispatcher_.joinable()) dispatcher_.join();
  // The dispatcher is gone, so its state can be touched here.
  for (auto& [addr, conn] : outbound_)
    if (conn->fd >= 0) ::shutdown(conn->fd, SHUT_RDWR);
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::list<std::thread> threads;
  {
    std::lock_guard lock(threads_mu_);
    for (auto& weak : inbound_)
      if (auto conn = weak.lock()) ::shutdown(conn->fd, SHUT_RDWR);
    threads.swap(threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
  // Threads spawned while joining (none expected once stopping) are
  // collected too.
  std::lock_guard lock(threads_mu_);
  for (auto& t : threads_)
    if (t.joinable()) t.join();
  threads_.clear();
  outbound_.clear();
  pending_.clear();
}

void SocketTransport::dispatch_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    if (timers_.empty()) {
      cv_.wait(lock);
      continue;
    }
    if (timers_.top().when > Clock::now()) {
      cv_.wait_until(lock, timers_.top().when);
      continue;
    }
    auto fn = std::move(const_cast<Timer&>(timers_.top()).fn);
    timers_.pop();
    lock.unlock();
    try {
      fn();
    } catch (const std::exception& e) {
      std::cerr << "ecstore: dispatcher task failed: " << e.what() << '\n';
    }
    lock.lock();
    check_waiters();
  }
}

void SocketTransport::check_waiters() {
  bool any = false;
  for (Waiter* w : waiters_) {
    if (!w->satisfied && (*w->done)()) {
      w->satisfied = true;
      any = true;
    }
  }
  if (any) waiters_cv_.notify_all();
}

void SocketTransport::after(double delay_ms, std::function<void()> fn) {
  const auto when = Clock::now() + std::chrono::microseconds(static_cast<std::int64_t>(std::max(0.0, delay_ms) * 1000));
  {
    std::lock_guard lock(mu_);
    timers_.push(Timer{when, timer_seq_++, std::move(fn)});
  }
  cv_.notify_one();
}

void SocketTransport::run(const std::function<void()>& start, const std::function<bool()>& done) {
  if (std::this_thread::get_id() == dispatcher_id_)
    throw Error(Errc::protocol, "run() called from the dispatcher thread");
  Waiter w{&done};
  std::exception_ptr failure;
  bool started = false;
  // done() is only meaningful once start has run.
  std::function<bool()> finished = [&] { return failure != nullptr || (started && done()); };
  w.done = &finished;
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw Error(Errc::transport, "transport stopped");
    waiters_.push_back(&w);
  }
  post([&] {
    started = true;
    try {
      start();
    } catch (...) {
      failure = std::current_exception();
    }
  });
  std::unique_lock lock(mu_);
  waiters_cv_.wait(lock, [&] { return w.satisfied || stopping_; });
  waiters_.remove(&w);
  const bool ok = w.satisfied;
  lock.unlock();
  if (failure) std::rethrow_exception(failure);
  if (!ok) throw Error(Errc::transport, started ? "transport stopped mid-operation" : "transport stopped");
}

double SocketTransport::now_ms() const {
  return std::chrono::duration<double, std::milli>(Clock::now() - epoch_).count();
}

std::uint64_t SocketTransport::timestamp_ms() const {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

TransportStats SocketTransport::stats() const {
  return {bytes_sent_.load(), bytes_received_.load(), messages_sent_.load()};
}

void SocketTransport::start_connect(const Address& to) {
  auto conn = std::make_shared<Outbound>(to);
  outbound_[to] = conn;
  const double timeout = options_.connect_timeout_ms;
  spawn([this, conn, timeout] {
    std::string why;
    const int fd = dial(conn->to, timeout, why);
    post([this, conn, fd, why] {
      if (fd < 0) {
        fail_connection(conn, why);
        return;
      }
      conn->fd = fd;
      if (conn->state == Outbound::State::closed) {
        // Abandoned while dialing.
        ::shutdown(fd, SHUT_RDWR);
        return;
      }
      conn->state = Outbound::State::open;
      spawn([this, conn] { read_replies(conn); });
      send_pending(conn);
      auto waiters = std::move(conn->connect_waiters);
      for (auto& w : waiters) w(Errc::ok);
    });
  });
}

void SocketTransport::send_pending(const std::shared_ptr<Outbound>& conn) {
  auto queued = std::move(conn->queued);
  for (auto& [rid, frame] : queued) {
    if (!pending_.contains(rid)) continue;  // cancelled while connecting
    std::lock_guard lock(conn->write_mu);
    if (!write_all(conn->fd, frame.data(), frame.size())) {
      fail_connection(conn, "write to " + conn->to + " failed");
      return;
    }
  }
}

void SocketTransport::fail_connection(const std::shared_ptr<Outbound>& conn, const std::string& why) {
  const bool was_closed = conn->state == Outbound::State::closed;
  conn->state = Outbound::State::closed;
  auto it = outbound_.find(conn->to);
  if (it != outbound_.end() && it->second == conn) outbound_.erase(it);
  if (conn->fd >= 0) ::shutdown(conn->fd, SHUT_RDWR);
  auto outstanding = std::move(conn->outstanding);
  conn->outstanding.clear();
  for (auto rid : outstanding) {
    auto p = pending_.find(rid);
    if (p == pending_.end()) continue;
    auto cb = std::move(p->second.on_reply);
    pending_.erase(p);
    cb(Error(Errc::transport, why));
  }
  if (!was_closed) {
    auto waiters = std::move(conn->connect_waiters);
    for (auto& w : waiters) w(Errc::transport);
  }
}

void SocketTransport::read_replies(std::shared_ptr<Outbound> conn) {
  Bytes frame;
  while (true) {
    const auto status = read_frame(conn->fd, frame);
    if (status != FrameStatus::ok) {
      post([this, conn] { fail_connection(conn, "connection to " + conn->to + " closed"); });
      return;
    }
    bytes_received_ += frame.size();
    std::optional<wire::Decoded> decoded;
    try {
      decoded = wire::decode_message(frame);
    } catch (const Error& e) {
      const std::uint64_t rid = frame_request_id(frame);
      const Errc code = e.code();
      post([this, conn, rid, code] {
        conn->outstanding.erase(rid);
        auto p = pending_.find(rid);
        if (p == pending_.end()) return;
        auto cb = std::move(p->second.on_reply);
        pending_.erase(p);
        cb(Error(code, "undecodable reply from " + conn->to));
      });
      continue;
    }
    auto msg = std::make_shared<wire::Message>(std::move(decoded->message));
    post([this, conn, msg] {
      conn->outstanding.erase(msg->request_id);
      auto p = pending_.find(msg->request_id);
      if (p == pending_.end()) return;  // cancelled or timed out
      auto cb = std::move(p->second.on_reply);
      pending_.erase(p);
      cb(std::move(*msg));
    });
  }
}

void SocketTransport::connect(const Address& to, std::function<void(Errc)> done) {
  auto it = outbound_.find(to);
  if (it == outbound_.end()) {
    start_connect(to);
    it = outbound_.find(to);
  }
  auto& conn = it->second;
  ++conn->users;
  if (conn->state == Outbound::State::open) {
    post([done = std::move(done)] { done(Errc::ok); });
  } else {
    conn->connect_waiters.push_back(std::move(done));
  }
}

void SocketTransport::disconnect(const Address& to) {
  auto it = outbound_.find(to);
  if (it == outbound_.end()) return;
  auto conn = it->second;
  if (conn->users > 0) --conn->users;
  if (conn->users == 0 && conn->outstanding.empty() && conn->state == Outbound::State::open)
    fail_connection(conn, "closed");
}

SendInfo SocketTransport::request(const Address& to, wire::Body body, ReplyFn on_reply) {
  const std::uint64_t rid = ++next_id_;
  Bytes frame = wire::encode_message(wire::Message{rid, std::move(body)});
  SendInfo info{rid, frame.size()};
  bytes_sent_ += frame.size();
  ++messages_sent_;
  pending_.emplace(rid, Pending{std::move(on_reply), to});

  auto it = outbound_.find(to);
  if (it == outbound_.end()) {
    start_connect(to);
    it = outbound_.find(to);
  }
  auto conn = it->second;
  conn->outstanding.insert(rid);
  if (conn->state == Outbound::State::open) {
    std::lock_guard lock(conn->write_mu);
    if (!write_all(conn->fd, frame.data(), frame.size())) {
      // Report asynchronously, like every other completion.
      post([this, conn] { fail_connection(conn, "write to " + conn->to + " failed"); });
    }
  } else {
    conn->queued.emplace_back(rid, std::move(frame));
  }
  after(options_.request_timeout_ms, [this, rid, to] {
    auto p = pending_.find(rid);
    if (p == pending_.end()) return;
    auto cb = std::move(p->second.on_reply);
    pending_.erase(p);
    if (auto c = outbound_.find(to); c != outbound_.end()) c->second->outstanding.erase(rid);
    cb(Error(Errc::transport, "request to " + to + " timed out"));
  });
  return info;
}

void SocketTransport::cancel(const Address& to, std::uint64_t request_id) {
  if (pending_.erase(request_id) == 0) return;
  auto it = outbound_.find(to);
  if (it == outbound_.end()) return;
  auto conn = it->second;
  conn->outstanding.erase(request_id);
  if (conn->state != Outbound::State::open) return;
  if (conn->outstanding.empty()) {
    fail_connection(conn, "cancelled");
    return;
  }
  Bytes frame = wire::encode_message(wire::Message{++next_id_, wire::Cancel{request_id}});
  bytes_sent_ += frame.size();
  ++messages_sent_;
  std::lock_guard lock(conn->write_mu);
  write_all(conn->fd, frame.data(), frame.size());
}

void SocketTransport::listen(MessageHandler* handler) {
  handler_ = handler;
  auto [host, port] = split_address(self_);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_text = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0)
    throw Error(Errc::io, "resolve " + self_ + ": " + ::gai_strerror(rc));
  int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw Error(Errc::io, std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 128) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw Error(Errc::io, "node " + self_ + ": cannot listen: " + why);
  }
  ::freeaddrinfo(res);
  listen_fd_ = fd;
  spawn([this] { accept_loop(); });
}

void SocketTransport::accept_loop() {
  while (true) {
    sockaddr_storage peer{};
    socklen_t len = sizeof(peer);
    const int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;  // listener shut down
    }
    {
      std::lock_guard lock(mu_);
      if (stopping_) {
        ::close(fd);
        return;
      }
    }
    set_nodelay(fd);
    char host[INET6_ADDRSTRLEN] = "?";
    std::uint16_t port = 0;
    if (peer.ss_family == AF_INET) {
      auto* in = reinterpret_cast<sockaddr_in*>(&peer);
      ::inet_ntop(AF_INET, &in->sin_addr, host, sizeof(host));
      port = ntohs(in->sin_port);
    } else if (peer.ss_family == AF_INET6) {
      auto* in6 = reinterpret_cast<sockaddr_in6*>(&peer);
      ::inet_ntop(AF_INET6, &in6->sin6_addr, host, sizeof(host));
      port = ntohs(in6->sin6_port);
    }
    auto conn = std::make_shared<Inbound>(fd, std::string(host) + ":" + std::to_string(port));
    {
      std::lock_guard lock(threads_mu_);
      inbound_.remove_if([](const std::weak_ptr<Inbound>& w) { return w.expired(); });
      inbound_.push_back(conn);
    }
    spawn([this, conn] { serve(conn); });
  }
}

void SocketTransport::serve(std::shared_ptr<Inbound> conn) {
  std::uint8_t version = 0;
  if (!wait_readable(conn->fd, options_.connect_timeout_ms) || !read_exact(conn->fd, &version, 1) ||
      version != wire::kProtocolVersion)
    return;
  const std::uint8_t reply_version = wire::kProtocolVersion;
  if (!write_all(conn->fd, &reply_version, 1)) return;

  auto send_reply = [this, conn](std::uint64_t rid, wire::Body body) {
    Bytes frame = wire::encode_message(wire::Message{rid, std::move(body)});
    std::lock_guard lock(conn->write_mu);
    if (write_all(conn->fd, frame.data(), frame.size())) {
      bytes_sent_ += frame.size();
      ++messages_sent_;
    }
  };

  Bytes frame;
  while (true) {
    const auto status = read_frame(conn->fd, frame);
    if (status == FrameStatus::bad_length) {
      // The stream cannot be resynchronized.
      send_reply(0, wire::ErrorReply{{Errc::bad_length, "frame length out of range"}});
      return;
    }
    if (status != FrameStatus::ok) return;
    bytes_received_ += frame.size();
    const std::uint64_t rid = frame_request_id(frame);
    wire::Message msg;
    try {
      auto decoded = wire::decode_message(frame);
      msg = std::move(decoded->message);
    } catch (const Error& e) {
      send_reply(rid, wire::ErrorReply{{e.code(), e.what()}});
      continue;
    }
    auto replied = std::make_shared<std::atomic<bool>>(false);
    Responder respond = [send_reply, rid, replied](wire::Body body) {
      if (replied->exchange(true)) return;
      send_reply(rid, std::move(body));
    };
    if (handler_ == nullptr) {
      respond(wire::ErrorReply{{Errc::routing, self_ + " serves no requests"}});
      continue;
    }
    if (handler_->concurrent(msg)) {
      try {
        handler_->handle(conn->peer, msg, respond);
      } catch (const Error& e) {
        respond(wire::ErrorReply{{e.code(), e.what()}});
      } catch (const std::exception& e) {
        respond(wire::ErrorReply{{Errc::io, e.what()}});
      }
      continue;
    }
    post([this, peer = conn->peer, msg = std::move(msg), respond] {
      try {
        handler_->handle(peer, msg, respond);
      } catch (const Error& e) {
        respond(wire::ErrorReply{{e.code(), e.what()}});
      } catch (const std::exception& e) {
        respond(wire::ErrorReply{{Errc::io, e.what()}});
      }
    });
  }
}

}  // namespace ecstore
