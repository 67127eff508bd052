#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <random>
#include <string>
#include <vector>

#include "psmsat/error.hpp"

namespace psmsat {

/// Contention-window schedule. `windows[k]` is b_k: after k collisions the
/// backoff is uniform on [0, b_k - 1]. The last index is the maximum stage K;
/// a collision at stage K discards the frame.
class BackoffSchedule {
 public:
  explicit BackoffSchedule(std::vector<std::int64_t> windows) : windows_(std::move(windows)) {
    if (windows_.empty()) throw ConfigError("mac.windows: schedule needs at least one stage");
    for (std::size_t k = 0; k < windows_.size(); ++k)
      if (windows_[k] < 1)
        throw ConfigError("mac.windows: window " + std::to_string(k) + " must be >= 1");
  }

  /// windows[k] = min(cwmin * 2^k, cwcap) for k = 0..max_stage.
  static BackoffSchedule doubling(std::int64_t cwmin, int max_stage, std::int64_t cwcap) {
    if (max_stage < 0) throw ConfigError("mac.k must be >= 0");
    if (cwmin < 1) throw ConfigError("mac.cwmin must be >= 1");
    if (cwcap < cwmin) throw ConfigError("mac.cwcap must be >= mac.cwmin");
    std::vector<std::int64_t> w;
    std::int64_t b = cwmin;
    for (int k = 0; k <= max_stage; ++k) {
      w.push_back(std::min(b, cwcap));
      if (b < cwcap) b *= 2;
    }
    return BackoffSchedule(std::move(w));
  }

  int max_stage() const { return static_cast<int>(windows_.size()) - 1; }
  std::size_t stages() const { return windows_.size(); }
  std::int64_t window(int k) const {
    check_stage(k);
    return windows_[static_cast<std::size_t>(k)];
  }
  const std::vector<std::int64_t>& windows() const { return windows_; }

  void check_stage(int k) const {
    if (k < 0 || k > max_stage())
      throw std::out_of_range("backoff stage " + std::to_string(k) + " outside [0," +
                              std::to_string(max_stage()) + "]");
  }

  friend bool operator==(const BackoffSchedule&, const BackoffSchedule&) = default;

 private:
  std::vector<std::int64_t> windows_;
};

/// 802.11b schedule: K = 7, b_k = 2^(5+k) capped at 1024.
inline BackoffSchedule default_schedule() { return BackoffSchedule::doubling(32, 7, 1024); }

/// Mean of the stage-k backoff in slots, (b_k - 1) / 2.
inline double mean_backoff(const BackoffSchedule& s, int k) {
  return static_cast<double>(s.window(k) - 1) / 2.0;
}

template <std::uniform_random_bit_generator Rng>
std::int64_t sample_backoff(const BackoffSchedule& s, int k, Rng& rng) {
  const std::int64_t b = s.window(k);
  if (b == 1) return 0;
  return std::uniform_int_distribution<std::int64_t>{0, b - 1}(rng);
}

}  // namespace psmsat
