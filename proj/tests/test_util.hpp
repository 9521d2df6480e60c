#pragma once

// Shared helpers for the unit and acceptance suites: network parameter
// flattening and an implementation-independent central-difference gradient.

#include <functional>

#include "mbrl/nn.hpp"

namespace mbrl::testutil {

inline Vec flatten_params(const nn::Network& net) {
  int total = 0;
  for (const auto& l : net.layers) total += static_cast<int>(l.W.size() + l.b.size());
  total += static_cast<int>(net.dropout_logits.size());
  Vec out(total);
  int at = 0;
  for (const auto& l : net.layers) {
    for (int c = 0; c < l.W.cols(); ++c)
      for (int r = 0; r < l.W.rows(); ++r) out(at++) = l.W(r, c);
    for (int i = 0; i < l.b.size(); ++i) out(at++) = l.b(i);
  }
  for (double v : net.dropout_logits) out(at++) = v;
  return out;
}

inline void unflatten_params(nn::Network& net, const Vec& theta) {
  int at = 0;
  for (auto& l : net.layers) {
    for (int c = 0; c < l.W.cols(); ++c)
      for (int r = 0; r < l.W.rows(); ++r) l.W(r, c) = theta(at++);
    for (int i = 0; i < l.b.size(); ++i) l.b(i) = theta(at++);
  }
  for (double& v : net.dropout_logits) v = theta(at++);
}

inline Vec flatten_grad(const nn::NetGrad& g) {
  int total = 0;
  for (std::size_t l = 0; l < g.W.size(); ++l)
    total += static_cast<int>(g.W[l].size() + g.b[l].size());
  total += static_cast<int>(g.logit.size());
  Vec out(total);
  int at = 0;
  for (std::size_t l = 0; l < g.W.size(); ++l) {
    for (int c = 0; c < g.W[l].cols(); ++c)
      for (int r = 0; r < g.W[l].rows(); ++r) out(at++) = g.W[l](r, c);
    for (int i = 0; i < g.b[l].size(); ++i) out(at++) = g.b[l](i);
  }
  for (double v : g.logit) out(at++) = v;
  return out;
}

// Central finite differences of an arbitrary scalar function of the
// parameters; the oracle against which analytic backprop is checked.
inline Vec fd_gradient(nn::Network net, const std::function<double(const nn::Network&)>& f,
                       double step = 1e-5) {
  const Vec theta0 = flatten_params(net);
  Vec grad(theta0.size());
  for (int i = 0; i < theta0.size(); ++i) {
    Vec theta = theta0;
    theta(i) = theta0(i) + step;
    unflatten_params(net, theta);
    const double up = f(net);
    theta(i) = theta0(i) - step;
    unflatten_params(net, theta);
    const double down = f(net);
    grad(i) = (up - down) / (2.0 * step);
  }
  unflatten_params(net, theta0);
  return grad;
}

}  // namespace mbrl::testutil
