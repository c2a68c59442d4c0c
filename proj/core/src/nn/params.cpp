#include "jpt/nn/params.hpp"

#include <cmath>

#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {

Matrix& ParamSet::add(const std::string& name, Matrix value) {
  auto [it, inserted] = tensors_.insert_or_assign(name, std::move(value));
  (void)inserted;
  return it->second;
}

Matrix& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ModelError("missing parameter tensor '" + name + "'");
  return it->second;
}

const Matrix& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ModelError("missing parameter tensor '" + name + "'");
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, m] : tensors_) out.add(name, Matrix::Zero(m.rows(), m.cols()));
  return out;
}

void ParamSet::set_zero() {
  for (auto& [name, m] : tensors_) m.setZero();
}

void ParamSet::merge(const ParamSet& other) {
  for (const auto& [name, m] : other.tensors_) add(name, m);
}

std::uint64_t ParamSet::checksum() const {
  Fnv1a64 h;
  for (const auto& [name, m] : tensors_) {
    h.update(name);
    h.update_pod(static_cast<std::int64_t>(m.rows()));
    h.update_pod(static_cast<std::int64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) h.update_pod(static_cast<float>(m.data()[i]));
  }
  return h.digest();
}

void round_to_f32(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
}

void round_to_f32(ParamSet& params) {
  for (auto& [name, m] : params.tensors()) round_to_f32(m);
}

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  round_to_f32(m);
  return m;
}

void Binding::bind(const ParamSet& params, ParamSet* grads) {
  for (const auto& [name, m] : params.tensors()) {
    Matrix* g = nullptr;
    if (grads != nullptr) {
      g = &grads->at(name);
      if (g->rows() != m.rows() || g->cols() != m.cols()) {
        throw ModelError("gradient buffer for '" + name + "' has the wrong shape");
      }
    }
    vars_.insert_or_assign(name, graph_->parameter(m, g));
  }
}

ad::Var Binding::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ModelError("parameter '" + name + "' is not bound");
  return it->second;
}

}  // namespace jpt
