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

// Append-only log of wire frames. State that is a deterministic function of
// the operations applied to it is persisted by journaling the operations
// and replaying them on start. A torn final record is dropped.

#pragma once

#include <cstdio>
#include <filesystem>
#include <vector>

#include "ecstore/wire.hpp"

namespace ecstore {

class Journal {
 public:
  /// An empty path disables the journal.
  explicit Journal(std::filesystem::path path = {});
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  bool enabled() const { return !path_.empty(); }
  const std::filesystem::path& path() const { return path_; }

  /// Appends and flushes one frame.
  void append(const wire::Message& message);

  /// Every complete record in order. Truncates the file after the last
  /// complete record so later appends stay parseable.
  std::vector<wire::Message> replay();

  /// Replaces the log with exactly these records.
  void rewrite(const std::vector<wire::Message>& messages);

 private:
  void open_for_append();

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

}  // namespace ecstore
