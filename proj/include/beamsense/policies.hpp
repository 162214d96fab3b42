#ifndef BEAMSENSE_POLICIES_HPP
#define BEAMSENSE_POLICIES_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <string>

#include "beamsense/aoi.hpp"

namespace beamsense::policies {

enum class PolicyKind { dqn, randomized, periodic, always, never };

PolicyKind parse_policy_kind(const std::string& name);
std::string to_string(PolicyKind kind);

/// Per-slot sensing decision. Implementations may keep internal state (RNG,
/// counters); one instance drives one run.
class SensingPolicy {
 public:
  virtual ~SensingPolicy() = default;
  virtual int decide(const aoi::AoiQueueState& state, long long slot) = 0;
};

/// I.i.d. Bernoulli(alpha_max) sensing.
class RandomizedPolicy final : public SensingPolicy {
 public:
  RandomizedPolicy(double alpha_max, std::uint64_t seed);
  int decide(const aoi::AoiQueueState& state, long long slot) override;

 private:
  double alpha_max_;
  std::mt19937_64 rng_;
};

/// Deterministic rate-alpha_max schedule: sense at t iff
/// floor(t*alpha) > floor((t-1)*alpha). Every prefix rate <= alpha + 1/t.
class PeriodicPolicy final : public SensingPolicy {
 public:
  explicit PeriodicPolicy(double alpha_max);
  int decide(const aoi::AoiQueueState& state, long long slot) override;

 private:
  double alpha_max_;
};

class AlwaysPolicy final : public SensingPolicy {
 public:
  int decide(const aoi::AoiQueueState&, long long) override { return 1; }
};

class NeverPolicy final : public SensingPolicy {
 public:
  int decide(const aoi::AoiQueueState&, long long) override { return 0; }
};

/// Builds one of the non-learned policies. The dqn kind is constructed by
/// the harness from a trained Q-network instead.
std::unique_ptr<SensingPolicy> make_baseline_policy(PolicyKind kind, double alpha_max,
                                                    std::uint64_t seed);

}  // namespace beamsense::policies

#endif
