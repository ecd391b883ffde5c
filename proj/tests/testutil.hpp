#ifndef POLIFUSE_TESTS_TESTUTIL_HPP_
#define POLIFUSE_TESTS_TESTUTIL_HPP_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "polifuse/autodiff.hpp"
#include "polifuse/common.hpp"
#include "polifuse/params.hpp"

namespace testutil {

using polifuse::Matrixd;
using polifuse::Rng;
using Taped = polifuse::Tape<double>;

inline Matrixd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                             double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrixd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d(rng);
  return m;
}

// Reduce a matrix node to a scalar through a fixed random functional so the
// finite-difference check exercises the whole Jacobian.
inline int dot_const(Taped& t, int y, const Matrixd& c) {
  return t.sum_all(t.hadamard(y, t.constant(c)));
}

// Central-difference check of d(loss)/d(inputs). `build` maps fresh leaf nodes
// to a 1x1 loss node and must be deterministic. Returns the worst relative
// error across every input element.
inline double fd_check(const std::vector<Matrixd>& inputs,
                       const std::function<int(Taped&, const std::vector<int>&)>& build,
                       double h = 1e-5) {
  std::vector<Matrixd> grads;
  {
    Taped t;
    std::vector<int> ids;
    for (const auto& m : inputs) ids.push_back(t.leaf(m));
    int loss = build(t, ids);
    t.backward(loss);
    for (int id : ids) grads.push_back(t.grad(id));
  }
  auto eval = [&](const std::vector<Matrixd>& xs) {
    Taped t;
    std::vector<int> ids;
    for (const auto& m : xs) ids.push_back(t.constant(m));
    return t.val(build(t, ids))(0, 0);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Eigen::Index r = 0; r < inputs[i].rows(); ++r)
      for (Eigen::Index c = 0; c < inputs[i].cols(); ++c) {
        std::vector<Matrixd> xp = inputs, xm = inputs;
        xp[i](r, c) += h;
        xm[i](r, c) -= h;
        const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
        const double an = grads[i](r, c);
        const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
        worst = std::max(worst, rel);
      }
  }
  return worst;
}

// Finite-difference check of d(loss)/d(parameters) for a model built on a
// fresh tape by `build`. Samples a deterministic spread of entries from every
// parameter whose name passes `filter` (empty = all). Returns the worst
// relative error seen.
inline double param_fd_check(
    polifuse::ParameterSet<double>& params,
    const std::function<int(Taped&, polifuse::ParameterSet<double>&)>& build,
    double h = 1e-4, int entries_per_tensor = 6, const std::string& filter = {}) {
  params.zero_grad();
  {
    Taped t;
    t.backward(build(t, params));
  }
  std::map<std::string, Matrixd> grads;
  for (const auto& name : params.names()) grads[name] = params.grad(name);

  auto eval = [&] {
    Taped t;
    return t.val(build(t, params))(0, 0);
  };
  double worst = 0.0;
  for (const auto& name : params.names()) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    Matrixd& value = params.value(name);
    const Eigen::Index total = value.size();
    const int n = std::min<Eigen::Index>(entries_per_tensor, total);
    for (int s = 0; s < n; ++s) {
      const Eigen::Index i = total * s / n;
      const double saved = value.data()[i];
      value.data()[i] = saved + h;
      const double fp = eval();
      value.data()[i] = saved - h;
      const double fm = eval();
      value.data()[i] = saved;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = grads[name].data()[i];
      const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace testutil

#endif  // POLIFUSE_TESTS_TESTUTIL_HPP_
