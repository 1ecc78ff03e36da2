#include "flin/nn/parameters.hpp"

#include <bit>
#include <fstream>

#include "flin/error.hpp"

namespace flin::nn {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'I', 'N', 'W', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("weight archive truncated");
  return v;
}

}  // namespace

Parameter& ParameterSet::add(std::string name, Index rows, Index cols) {
  if (contains(name)) throw Error("duplicate parameter " + name);
  items_.push_back(std::make_shared<Parameter>(std::move(name), rows, cols));
  return *items_.back();
}

void ParameterSet::adopt(std::shared_ptr<Parameter> p) {
  if (contains(p->name)) throw Error("duplicate parameter " + p->name);
  items_.push_back(std::move(p));
}

Parameter& ParameterSet::at(std::string_view name) {
  for (auto& p : items_) {
    if (p->name == name) return *p;
  }
  throw NotFoundError("no parameter named " + std::string(name));
}

const Parameter& ParameterSet::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

std::shared_ptr<Parameter> ParameterSet::shared(std::string_view name) const {
  for (const auto& p : items_) {
    if (p->name == name) return p;
  }
  throw NotFoundError("no parameter named " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& p : items_) {
    if (p->name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p->grad.setZero(p->value.rows(), p->value.cols());
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != items_.size()) throw Error("snapshot size mismatch");
  for (std::size_t i = 0; i < items_.size(); ++i) items_[i]->value = values[i];
}

bool ParameterSet::all_finite() const {
  for (const auto& p : items_) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

void init_uniform(Parameter& p, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index j = 0; j < p.value.cols(); ++j) {
    for (Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = dist(rng);
  }
}

void save_weights(const ParameterSet& params, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "weight archives are little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& p : params.items()) {
    write_pod(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod(out, static_cast<std::int64_t>(p->value.rows()));
    write_pod(out, static_cast<std::int64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  if (!out) throw Error("failed writing " + path.string());
}

void load_weights(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw ParseError(path.string() + ": not a weight archive");
  }
  const auto count = read_pod<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = read_pod<std::int64_t>(in);
    const auto cols = read_pod<std::int64_t>(in);
    if (!params.contains(name)) throw ParseError(path.string() + ": unexpected parameter " + name);
    Parameter& p = params.at(name);
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw ParseError(path.string() + ": shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(rows * cols)));
    if (!in) throw ParseError("weight archive truncated");
  }
  if (count != params.items().size()) {
    throw ParseError(path.string() + ": archive holds " + std::to_string(count) + " tensors, model expects " +
                     std::to_string(params.items().size()));
  }
}

}  // namespace flin::nn
