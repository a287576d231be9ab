#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lecb/numerics/rng.hpp"
#include "lecb/numerics/tensor.hpp"

namespace lecb::num {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

enum class Init { zeros, ones, xavier_uniform };

/// Ordered, name-unique collection of parameters. Pointers returned by add()
/// stay valid for the lifetime of the store.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  /// Xavier init draws from the store's own seeded stream in registration order.
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols, Init init);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  void set_trainable(bool trainable);
  /// FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const;

 private:
  Rng rng_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

void xavier_uniform(Tensor& t, Rng& rng);

}  // namespace lecb::num
