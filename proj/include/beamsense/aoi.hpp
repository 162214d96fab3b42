#ifndef BEAMSENSE_AOI_HPP
#define BEAMSENSE_AOI_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beamsense::aoi {

/// Data age and virtual-queue backlog: the sensing agent's state.
struct AoiQueueState {
  int age = 0;       // slots since the last sensing action
  double queue = 0;  // virtual backlog tracking budget violations
};

/// Average sensing budget and the drift/penalty trade-off weight.
struct BudgetConfig {
  double alpha_max = 0.5;  // in (0, 1]
  double v_param = 10.0;   // >= 0

  void validate() const {
    if (!(alpha_max > 0.0 && alpha_max <= 1.0)) {
      throw std::invalid_argument(
          "budget.alpha_max must satisfy 0 < alpha_max <= 1");
    }
    if (!(v_param >= 0.0)) {
      throw std::invalid_argument("budget.v_param must satisfy v_param >= 0");
    }
  }
};

/// Age transition: a sensing action resets the age, otherwise it grows by one.
inline int step_age(int age, int sense) { return sense ? 0 : age + 1; }

/// Virtual-queue transition: arrival `sense`, service `alpha_max`, clamped
/// at zero.
inline double step_queue(double queue, int sense, double alpha_max) {
  return std::max(queue + static_cast<double>(sense) - alpha_max, 0.0);
}

/// Immediate reward: -(V * loss + queue * sense). The caller is responsible
/// for clamping `loss` into [0, loss_clamp(M)]; a non-finite loss is a bug
/// upstream and is rejected.
inline double reward(double v_param, double loss, double queue, int sense) {
  if (!std::isfinite(loss)) {
    throw std::domain_error("reward: prediction loss must be finite");
  }
  return -(v_param * loss + queue * static_cast<double>(sense));
}

/// Saturates an age at the training age limit.
inline int age_capped(int age, int cap) { return std::min(age, cap); }

/// Upper clamp applied to the cross-entropy loss before it enters the
/// reward; keeps the reward bounded for any predictor output.
inline double loss_clamp(int num_beams) {
  return std::log(static_cast<double>(num_beams)) + 10.0;
}

}  // namespace beamsense::aoi

#endif
