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

#include "ecstore/journal.hpp"

#include <cerrno>
#include <cstring>

#include "ecstore/metadata.hpp"

namespace fs = std::filesystem;

namespace ecstore {

Journal::Journal(fs::path path) : path_(std::move(path)) {
  if (!path_.empty() && path_.has_parent_path()) fs::create_directories(path_.parent_path());
}

Journal::~Journal() {
  if (file_ != nullptr) std::fclose(file_);
}

void Journal::open_for_append() {
  if (file_ != nullptr) return;
  file_ = std::fopen(path_.c_str(), "ab");
  if (file_ == nullptr) throw Error(Errc::io, "cannot open " + path_.string() + ": " + std::strerror(errno));
}

void Journal::append(const wire::Message& message) {
  if (!enabled()) return;
  open_for_append();
  const Bytes frame = wire::encode_message(message);
  if (std::fwrite(frame.data(), 1, frame.size(), file_) != frame.size() || std::fflush(file_) != 0)
    throw Error(Errc::io, "append to " + path_.string() + " failed");
}

std::vector<wire::Message> Journal::replay() {
  std::vector<wire::Message> out;
  if (!enabled() || !fs::exists(path_)) return out;
  if (file_ != nullptr) {
    std::fclose(file_);
    file_ = nullptr;
  }
  const Bytes data = read_file(path_);
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::optional<wire::Decoded> d;
    try {
      d = wire::decode_message(std::span(data).subspan(pos));
    } catch (const Error&) {
      break;
    }
    if (!d) break;
    out.push_back(std::move(d->message));
    pos += d->consumed;
  }
  if (pos != data.size()) fs::resize_file(path_, pos);
  return out;
}

void Journal::rewrite(const std::vector<wire::Message>& messages) {
  if (!enabled()) return;
  if (file_ != nullptr) {
    std::fclose(file_);
    file_ = nullptr;
  }
  Bytes data;
  for (const auto& m : messages) wire::append_message(data, m);
  write_file_atomic(path_, data);
}

}  // namespace ecstore
