#include "lecb/numerics/parameter.hpp"

#include <cmath>
#include <cstring>

#include "lecb/error.hpp"

namespace lecb::num {

void xavier_uniform(Tensor& t, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
}

Parameter& ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                               Init init) {
  if (index_.count(name) != 0) throw ConfigError("parameter '" + name + "' registered twice");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(rows, cols);
  p->grad = Tensor(rows, cols);
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      p->value.fill(1.0);
      break;
    case Init::xavier_uniform:
      xavier_uniform(p->value, rng_);
      break;
  }
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return *params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

std::uint64_t ParameterStore::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : params_) {
    feed(p->name.data(), p->name.size());
    const std::size_t dims[2] = {p->value.rows(), p->value.cols()};
    feed(dims, sizeof(dims));
    feed(p->value.data(), p->value.size() * sizeof(double));
  }
  return h;
}

}  // namespace lecb::num
