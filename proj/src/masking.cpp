#include "dpga/masking.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>

#include "dpga/errors.hpp"

namespace dpga {

UpdateRate UpdateRate::from_tenths(int tenths) {
  if (tenths < 1 || tenths > 10) {
    throw ConfigError("update rate numerator " + std::to_string(tenths) +
                      " outside [1, 10]");
  }
  return UpdateRate(tenths);
}

UpdateRate UpdateRate::from_value(double p) {
  const double scaled = p * 10.0;
  const double rounded = std::round(scaled);
  if (!std::isfinite(p) || std::abs(scaled - rounded) > 1e-9 || rounded < 1.0 ||
      rounded > 10.0) {
    throw ConfigError("update rate " + std::to_string(p) +
                      " is not on the 0.1 grid in (0, 1]");
  }
  return UpdateRate(static_cast<int>(rounded));
}

UpdateRate UpdateRate::nearest(double p) {
  const double rounded = std::round(p * 10.0);
  return UpdateRate(static_cast<int>(std::clamp(rounded, 1.0, 10.0)));
}

bool SharedIndexSet::contains(std::uint32_t j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

SharedIndexSet SharedIndexSet::all(std::size_t d) {
  SharedIndexSet s;
  s.indices.resize(d);
  std::iota(s.indices.begin(), s.indices.end(), std::uint32_t{0});
  return s;
}

SharedIndexSet personal_indices(const SharedIndexSet& shared, std::size_t d) {
  SharedIndexSet out;
  out.indices.reserve(d - std::min(d, shared.size()));
  std::size_t k = 0;
  for (std::uint32_t j = 0; j < d; ++j) {
    if (k < shared.size() && shared.indices[k] == j) {
      ++k;
    } else {
      out.indices.push_back(j);
    }
  }
  return out;
}

bool identical(const SparseGradient& a, const SparseGradient& b) noexcept {
  if (a.round != b.round || a.rate != b.rate || a.indices != b.indices ||
      a.values.size() != b.values.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.values[i]) !=
        std::bit_cast<std::uint64_t>(b.values[i])) {
      return false;
    }
  }
  return true;
}

std::size_t shared_count(double p, std::size_t d) {
  if (!(p > 0.0) || p > 1.0) {
    throw ConfigError("update rate " + std::to_string(p) + " outside (0, 1]");
  }
  const double x = p * static_cast<double>(d);
  auto k = static_cast<std::size_t>(std::ceil(x));
  if (k >= 1 && x - static_cast<double>(k - 1) <= 1e-12 * x) --k;
  return std::min(k, d);
}

SharedIndexSet topk_shared_indices(const ParamVector& z, double p) {
  const std::size_t d = z.size();
  if (d == 0) throw ContractViolation("topk_shared_indices: empty vector");
  const std::size_t k = shared_count(p, d);

  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), std::uint32_t{0});
  auto larger = [&z](std::uint32_t a, std::uint32_t b) {
    const double ma = std::abs(z[a]);
    const double mb = std::abs(z[b]);
    return ma != mb ? ma > mb : a < b;
  };
  if (k < d) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), larger);
    order.resize(k);
  }
  std::sort(order.begin(), order.end());
  return SharedIndexSet{std::move(order)};
}

SharedIndexSet topk_shared_indices(const ParamVector& z, UpdateRate p) {
  return topk_shared_indices(z, p.value());
}

SparseGradient extract_shared(const ParamVector& z, const SharedIndexSet& shared,
                              std::uint64_t round, UpdateRate p) {
  SparseGradient msg;
  msg.round = round;
  msg.rate = p;
  msg.indices = shared.indices;
  msg.values.reserve(shared.size());
  for (auto j : shared.indices) {
    if (j >= z.size()) {
      throw ContractViolation("shared index " + std::to_string(j) +
                              " outside dimension " + std::to_string(z.size()));
    }
    msg.values.push_back(z[j]);
  }
  return msg;
}

ParamVector merge(const SparseGradient& global, const ParamVector& local_z) {
  ParamVector out = local_z;
  for (std::size_t k = 0; k < global.size(); ++k) {
    const auto j = global.indices[k];
    if (j >= out.size()) {
      throw ContractViolation("merge: index " + std::to_string(j) + " out of range");
    }
    out[j] = global.values[k];
  }
  return out;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint64_t bits;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint64_t take(std::size_t width, const char* field) {
    if (remaining() < width) {
      throw DecodeError(pos_, std::string("truncated message reading ") + field);
    }
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < width; ++b) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
    }
    pos_ += width;
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kMagic[4] = {'D', 'P', 'G', '1'};

}  // namespace

std::vector<std::uint8_t> encode(const SparseGradient& msg) {
  if (msg.indices.size() != msg.values.size()) {
    throw ContractViolation("encode: index and value counts differ");
  }
  std::vector<std::uint8_t> out;
  out.reserve(message_bytes(msg));
  for (auto b : kMagic) out.push_back(b);
  put_le(out, msg.round);
  put_le(out, static_cast<std::uint8_t>(msg.rate.tenths()));
  put_le(out, static_cast<std::uint32_t>(msg.size()));
  for (auto j : msg.indices) put_le(out, j);
  for (auto v : msg.values) put_le(out, v);
  return out;
}

SparseGradient decode(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  for (std::size_t b = 0; b < 4; ++b) {
    if (in.remaining() == 0) throw DecodeError(b, "truncated magic");
    if (in.take(1, "magic") != kMagic[b]) throw DecodeError(b, "bad magic");
  }
  SparseGradient msg;
  msg.round = in.take(8, "round");
  const std::size_t rate_pos = in.position();
  const auto tenths = static_cast<int>(in.take(1, "rate"));
  if (tenths < 1 || tenths > 10) {
    throw DecodeError(rate_pos, "rate byte " + std::to_string(tenths) + " outside [1, 10]");
  }
  msg.rate = UpdateRate::from_tenths(tenths);
  const std::size_t count_pos = in.position();
  const auto count = in.take(4, "count");
  if (in.remaining() < count * kMessageEntryBytes) {
    throw DecodeError(count_pos, "count " + std::to_string(count) +
                                     " exceeds the remaining " +
                                     std::to_string(in.remaining()) + " bytes");
  }
  msg.indices.reserve(count);
  msg.values.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t pos = in.position();
    const auto j = static_cast<std::uint32_t>(in.take(4, "index"));
    if (!msg.indices.empty() && j <= msg.indices.back()) {
      throw DecodeError(pos, "index " + std::to_string(j) + " not strictly ascending");
    }
    msg.indices.push_back(j);
  }
  for (std::uint64_t k = 0; k < count; ++k) {
    msg.values.push_back(std::bit_cast<double>(in.take(8, "value")));
  }
  if (in.remaining() != 0) throw DecodeError(in.position(), "trailing bytes");
  return msg;
}

}  // namespace dpga
