#include "beamsense/policies.hpp"

#include <cmath>
#include <stdexcept>

namespace beamsense::policies {

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "dqn") return PolicyKind::dqn;
  if (name == "randomized") return PolicyKind::randomized;
  if (name == "periodic") return PolicyKind::periodic;
  if (name == "always") return PolicyKind::always;
  if (name == "never") return PolicyKind::never;
  throw std::invalid_argument("unknown policy kind '" + name +
                              "' (expected dqn|randomized|periodic|always|never)");
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::dqn: return "dqn";
    case PolicyKind::randomized: return "randomized";
    case PolicyKind::periodic: return "periodic";
    case PolicyKind::always: return "always";
    case PolicyKind::never: return "never";
  }
  return "?";
}

namespace {
void check_budget(double alpha_max, const char* kind) {
  if (!(alpha_max > 0.0 && alpha_max <= 1.0)) {
    throw std::invalid_argument(std::string(kind) +
                                " policy requires 0 < alpha_max <= 1");
  }
}
}  // namespace

RandomizedPolicy::RandomizedPolicy(double alpha_max, std::uint64_t seed)
    : alpha_max_(alpha_max), rng_(seed) {
  check_budget(alpha_max, "randomized");
}

int RandomizedPolicy::decide(const aoi::AoiQueueState&, long long) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng_) < alpha_max_ ? 1 : 0;
}

PeriodicPolicy::PeriodicPolicy(double alpha_max) : alpha_max_(alpha_max) {
  check_budget(alpha_max, "periodic");
}

int PeriodicPolicy::decide(const aoi::AoiQueueState&, long long slot) {
  const double t = static_cast<double>(slot);
  return std::floor(t * alpha_max_) > std::floor((t - 1.0) * alpha_max_) ? 1 : 0;
}

std::unique_ptr<SensingPolicy> make_baseline_policy(PolicyKind kind, double alpha_max,
                                                    std::uint64_t seed) {
  switch (kind) {
    case PolicyKind::randomized:
      return std::make_unique<RandomizedPolicy>(alpha_max, seed);
    case PolicyKind::periodic:
      return std::make_unique<PeriodicPolicy>(alpha_max);
    case PolicyKind::always:
      return std::make_unique<AlwaysPolicy>();
    case PolicyKind::never:
      return std::make_unique<NeverPolicy>();
    case PolicyKind::dqn:
      throw std::invalid_argument(
          "dqn policy needs a trained Q-network; use DqnGreedyPolicy");
  }
  throw std::invalid_argument("unhandled policy kind");
}

}  // namespace beamsense::policies
