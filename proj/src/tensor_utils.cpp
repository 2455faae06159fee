#include "sde/tensor_utils.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>
#include <sstream>

#include "sde/errors.hpp"

namespace sde {

namespace {

struct DigestCtx {
  DigestCtx() : ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: digest init failed");
    }
  }

  void update(const void* data, std::size_t size) {
    if (size > 0) EVP_DigestUpdate(ctx.get(), data, size);
  }

  void update(const torch::Tensor& t) {
    auto c = t.detach().to(torch::kCPU).contiguous();
    const auto dims = c.sizes().vec();
    update(dims.data(), dims.size() * sizeof(int64_t));
    update(c.data_ptr(), c.nbytes());
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx;
};

}  // namespace

bool all_finite(const torch::Tensor& t) {
  if (!t.defined() || t.numel() == 0) return true;
  if (!t.is_floating_point()) return true;
  return torch::isfinite(t.detach()).all().item<bool>();
}

void require_finite(const torch::Tensor& t, const std::string& what) {
  if (!all_finite(t)) throw InvalidInput(what + ": contains non-finite values");
}

std::string shape_string(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const std::string& what) {
  if (a.sizes() != b.sizes()) {
    throw ContractViolation(what + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

std::string sha256_hex(const void* data, std::size_t size) {
  DigestCtx d;
  d.update(data, size);
  return d.hex();
}

std::string sha256_hex(const std::string& bytes) { return sha256_hex(bytes.data(), bytes.size()); }

std::string parameter_hash(const torch::nn::Module& module) {
  DigestCtx d;
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    d.update(item.key().data(), item.key().size());
    d.update(item.value());
  }
  for (const auto& item : module.named_buffers(/*recurse=*/true)) {
    d.update(item.key().data(), item.key().size());
    d.update(item.value());
  }
  return d.hex();
}

std::string tensors_hash(const std::vector<torch::Tensor>& tensors) {
  DigestCtx d;
  for (const auto& t : tensors) d.update(t);
  return d.hex();
}

void freeze(torch::nn::Module& module) {
  for (auto& p : module.parameters(/*recurse=*/true)) p.set_requires_grad(false);
}

}  // namespace sde

namespace sde {

torch::Generator seeded_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

}  // namespace sde

namespace sde {

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace sde
