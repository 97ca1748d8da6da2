#pragma once

#include <cmath>
#include <vector>

#include "recapdet/errors.hpp"
#include "recapdet/tensor.hpp"

namespace recapdet {

template <typename S>
struct AdamState {
  std::vector<Vec<S>> first_moment;
  std::vector<Vec<S>> second_moment;
  long step_count = 0;
  S lr = S(1e-4);
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S epsilon = S(1e-8);

  static AdamState make(const std::vector<Tensor<S>>& params, S lr) {
    AdamState st;
    st.lr = lr;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const auto& p : params) {
      st.first_moment.push_back(Vec<S>::Zero(p.size()));
      st.second_moment.push_back(Vec<S>::Zero(p.size()));
    }
    return st;
  }
};

// Bias-corrected Adam update. Parameters without a populated gradient (an
// ablated module that did not participate in the loss) contribute zero grad.
template <typename S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state) {
  if (params.size() != state.first_moment.size())
    throw UsageError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " params, got " + std::to_string(params.size()));
  state.step_count += 1;
  const S b1t = S(1) - static_cast<S>(std::pow(state.beta1, state.step_count));
  const S b2t = S(1) - static_cast<S>(std::pow(state.beta2, state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != params[i].size())
      throw UsageError("adam_step: moment shape mismatch at param " + std::to_string(i));
    if (params[i].has_grad()) {
      const Vec<S>& g = params[i].grad();
      m = state.beta1 * m + (S(1) - state.beta1) * g;
      v = state.beta2 * v + (S(1) - state.beta2) * g.square();
    } else {
      m *= state.beta1;
      v *= state.beta2;
    }
    params[i].data() -= state.lr * (m / b1t) / ((v / b2t).sqrt() + state.epsilon);
  }
}

}  // namespace recapdet
