#pragma once

#include <Eigen/Core>

namespace mbrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One (s, a, s', r) interaction record.
struct Transition {
  Vec state;
  Vec action;
  Vec next_state;
  double reward = 0.0;
};

// Per-output-dimension decomposition of a next-state prediction.
struct PredictiveDistribution {
  Vec mean;
  Vec epistemic_var;  // vanishes when the parameters carry no uncertainty
  Vec aleatoric_var;  // intrinsic noise; zero for models that cannot express it
};

}  // namespace mbrl
