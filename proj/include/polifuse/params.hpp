#ifndef POLIFUSE_PARAMS_HPP_
#define POLIFUSE_PARAMS_HPP_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "polifuse/autodiff.hpp"
#include "polifuse/common.hpp"

namespace polifuse {

// Named trainable tensors plus their accumulated gradients. Iteration order is
// the name's lexical order, which keeps serialization and the optimizer loop
// deterministic.
template <typename S>
class ParameterSet {
 public:
  using Mat = MatrixX<S>;

  struct Entry {
    Mat value;
    Mat grad;
  };

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  Mat& value(const std::string& name) { return at(name).value; }
  const Mat& value(const std::string& name) const { return at(name).value; }
  Mat& grad(const std::string& name) { return at(name).grad; }

  std::size_t size() const { return entries_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
  }

  // Creates the tensor if absent, filled by `init`. Existing tensors are
  // returned as-is so model builders can be re-run against a loaded set.
  template <typename Init>
  Mat& get_or_create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                     Init&& init) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      Entry e;
      e.value = Mat(rows, cols);
      init(e.value);
      e.grad = Mat::Zero(rows, cols);
      it = entries_.emplace(name, std::move(e)).first;
    }
    Entry& e = it->second;
    if (e.value.rows() != rows || e.value.cols() != cols)
      throw ValidationError("parameter shape clash for " + name);
    return e.value;
  }

  Mat& create_gaussian(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                       Rng& rng, double stddev) {
    return get_or_create(name, rows, cols, [&](Mat& m) {
      std::normal_distribution<double> dist(0.0, stddev);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = static_cast<S>(dist(rng));
    });
  }

  Mat& create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                       double fill) {
    return get_or_create(name, rows, cols,
                         [&](Mat& m) { m.setConstant(static_cast<S>(fill)); });
  }

  void zero_grad() {
    for (auto& [name, e] : entries_) e.grad.setZero();
  }

  // Tape leaf for this parameter; gradients land in our grad buffer during the
  // backward sweep. The tape caches the node per name, so binding twice keeps
  // the graph a DAG with a single shared leaf.
  int bind(Tape<S>& tape, const std::string& name) {
    Entry& e = at(name);
    return tape.bound_leaf(name, e.value, &e.grad);
  }

  // Global L2 norm of all gradients.
  double grad_norm() const {
    double s = 0.0;
    for (const auto& [name, e] : entries_) s += static_cast<double>(e.grad.squaredNorm());
    return std::sqrt(s);
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

 private:
  Entry& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ValidationError("unknown parameter " + name);
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

}  // namespace polifuse

#endif  // POLIFUSE_PARAMS_HPP_
