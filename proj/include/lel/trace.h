#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lel {

struct Channel {
  std::string name;
  std::vector<double> values;
};

// Uniformly sampled multi-channel series. Sample k sits at t0 + k * sample_period.
struct Trace {
  double sample_period = 1.0;
  double t0 = 0.0;
  std::vector<Channel> channels;
  std::string origin;

  std::size_t length() const { return channels.empty() ? 0 : channels.front().values.size(); }
  const std::vector<double>& channel(const std::string& name) const;
  std::vector<double>& channel(const std::string& name);
  bool has_channel(const std::string& name) const;

  // Throws ValidationError on unequal channel lengths or a non-positive period.
  void validate() const;

  static Trace single(std::string name, std::vector<double> values, double sample_period);
};

}  // namespace lel
