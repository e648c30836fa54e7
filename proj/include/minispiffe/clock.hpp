// Copyright 2026 the minispiffe authors
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

#pragma once

#include <atomic>
#include <cstdint>

namespace minispiffe {

/// Seconds since the Unix epoch. All validity windows, TTLs and audit
/// timestamps are expressed in this unit.
using UnixTime = std::int64_t;

/// Clock-skew allowance applied on both bounds of every validity check.
inline constexpr std::int64_t kClockSkewSeconds = 30;

class Clock {
  public:
    virtual ~Clock() = default;
    virtual UnixTime now() const = 0;
};

class SystemClock final : public Clock {
  public:
    UnixTime now() const override;
};

/// Manually driven clock. Scenario runs and expiry tests never read the wall
/// clock; they advance one of these instead.
class SimClock final : public Clock {
  public:
    explicit SimClock(UnixTime start) : now_(start) {}

    UnixTime now() const override { return now_.load(std::memory_order_relaxed); }
    void set(UnixTime t) { now_.store(t, std::memory_order_relaxed); }
    void advance(std::int64_t delta) { now_.fetch_add(delta, std::memory_order_relaxed); }

  private:
    std::atomic<UnixTime> now_;
};

}  // namespace minispiffe
