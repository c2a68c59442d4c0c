#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>

#include "jpt/autodiff/graph.hpp"
#include "jpt/util/matrix.hpp"
#include "jpt/util/rng.hpp"

namespace jpt {

// Named tensors, iterated in name order so every traversal (optimizer,
// checkpoint, checksum) is deterministic.
class ParamSet {
 public:
  Matrix& add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  void erase(const std::string& name) { tensors_.erase(name); }

  const std::map<std::string, Matrix>& tensors() const { return tensors_; }
  std::map<std::string, Matrix>& tensors() { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  // Total number of scalars.
  std::size_t scalar_count() const;

  ParamSet zeros_like() const;
  void set_zero();
  // Copies every tensor of `other` in, overwriting same-named entries.
  void merge(const ParamSet& other);
  // Hash over names, shapes and the float32 images of the values.
  std::uint64_t checksum() const;

 private:
  std::map<std::string, Matrix> tensors_;
};

// Rounds every entry to the nearest float32. Stored weights are float32, so
// parameters kept on the float32 grid survive a save/load unchanged.
void round_to_f32(Matrix& m);
void round_to_f32(ParamSet& params);

// Normal(0, stddev) entries, rounded to float32.
Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

// Parameters of one forward graph, looked up by name.
class Binding {
 public:
  explicit Binding(ad::Graph& graph) : graph_(&graph) {}

  // With grads == nullptr the parameters are frozen. Otherwise `grads` must
  // hold a same-shaped tensor for every name in `params`.
  void bind(const ParamSet& params, ParamSet* grads);
  ad::Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) != 0; }
  ad::Graph& graph() const { return *graph_; }

 private:
  ad::Graph* graph_;
  std::unordered_map<std::string, ad::Var> vars_;
};

}  // namespace jpt
