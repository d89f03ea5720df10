#include "lel/trace.h"

#include <algorithm>

#include "lel/errors.h"

namespace lel {

namespace {
template <typename Channels>
auto find_channel(Channels& channels, const std::string& name) {
  return std::find_if(channels.begin(), channels.end(),
                      [&](const Channel& c) { return c.name == name; });
}
}  // namespace

const std::vector<double>& Trace::channel(const std::string& name) const {
  auto it = find_channel(channels, name);
  if (it == channels.end()) throw ValidationError("trace has no channel '" + name + "'");
  return it->values;
}

std::vector<double>& Trace::channel(const std::string& name) {
  auto it = find_channel(channels, name);
  if (it == channels.end()) throw ValidationError("trace has no channel '" + name + "'");
  return it->values;
}

bool Trace::has_channel(const std::string& name) const {
  return find_channel(channels, name) != channels.end();
}

void Trace::validate() const {
  if (!(sample_period > 0.0)) throw ValidationError("trace sample period must be positive");
  for (const auto& c : channels) {
    if (c.values.size() != length())
      throw ValidationError("trace channel '" + c.name + "' has a different length");
  }
}

Trace Trace::single(std::string name, std::vector<double> values, double sample_period) {
  Trace t;
  t.sample_period = sample_period;
  t.channels.push_back({std::move(name), std::move(values)});
  return t;
}

}  // namespace lel
