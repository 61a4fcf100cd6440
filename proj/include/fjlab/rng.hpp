#pragma once

// Reproducible random variate streams for the simulation primitives.
//
// Every primitive sequence (interarrivals of one job type, services of one
// server/class) draws from its own counter-based substream keyed by
// (seed, stream id). The n-th output of a stream is a pure function of the
// key and n, so adding or removing a consumer never shifts another stream's
// draws and common random numbers across policies come for free.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fjlab {

// SplitMix64 finalizer; bijective 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Child seed for one replication of an experiment.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root ^ mix64(index + 0x9e3779b97f4a7c15ULL));
}

enum class StreamKind : std::uint32_t {
  arrival = 1,
  dedicated_service = 2,
  shared_service = 3,
  policy = 4,
  noise = 5,
};

struct StreamId {
  StreamKind kind;
  std::uint32_t a = 0;  // type j, dedicated k, shared server i, or path id
  std::uint32_t b = 0;  // second coordinate for (i, j) service pairs
};

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamId id) : key_(derive_key(seed, id)) {}

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on the open interval (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare value is cached per stream.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, StreamId id) {
    std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ULL);
    k = mix64(k ^ (static_cast<std::uint64_t>(id.kind) << 48));
    k = mix64(k ^ (static_cast<std::uint64_t>(id.a) << 16) ^ id.b);
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Family {
  exponential,
  erlang,
  uniform,
  deterministic,
  hyperexp2,
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::exponential: return "exponential";
    case Family::erlang: return "erlang";
    case Family::uniform: return "uniform";
    case Family::deterministic: return "deterministic";
    case Family::hyperexp2: return "hyperexp2";
  }
  return "?";
}

// Strictly positive distribution parameterized by (family, mean, scv).
// Each admissible family has finite exponential moments near 0.
struct DistributionSpec {
  Family family = Family::deterministic;
  double mean = 1.0;
  double scv = 0.0;
  int erlang_k = 1;

  static DistributionSpec make(Family family, double mean, double scv) {
    if (!(mean > 0.0)) {
      throw std::invalid_argument("distribution mean must be positive");
    }
    DistributionSpec s;
    s.family = family;
    s.mean = mean;
    s.scv = scv;
    switch (family) {
      case Family::exponential:
        if (std::abs(scv - 1.0) > 1e-9) {
          throw std::invalid_argument("exponential requires scv = 1");
        }
        break;
      case Family::erlang: {
        if (!(scv > 0.0) || scv > 1.0 + 1e-12) {
          throw std::invalid_argument("erlang requires scv = 1/k for integer k >= 1");
        }
        const int k = static_cast<int>(std::lround(1.0 / scv));
        if (k < 1 || std::abs(scv - 1.0 / k) > 1e-9) {
          throw std::invalid_argument("erlang requires scv = 1/k for integer k >= 1");
        }
        s.erlang_k = k;
        break;
      }
      case Family::uniform:
        if (!(scv > 0.0) || scv > 1.0 / 3.0 + 1e-12) {
          throw std::invalid_argument("uniform requires scv in (0, 1/3]");
        }
        break;
      case Family::deterministic:
        if (std::abs(scv) > 1e-12) {
          throw std::invalid_argument("deterministic requires scv = 0");
        }
        break;
      case Family::hyperexp2:
        if (!(scv > 1.0)) {
          throw std::invalid_argument("hyperexp2 requires scv > 1");
        }
        break;
    }
    return s;
  }

  double sample(RandomStream& stream) const {
    switch (family) {
      case Family::deterministic:
        return mean;
      case Family::exponential:
        return -mean * std::log(stream.next_unit());
      case Family::erlang: {
        double log_prod = 0.0;
        for (int i = 0; i < erlang_k; ++i) log_prod += std::log(stream.next_unit());
        return -(mean / erlang_k) * log_prod;
      }
      case Family::uniform: {
        const double half_width = mean * std::sqrt(3.0 * scv);
        return (mean - half_width) + 2.0 * half_width * stream.next_unit();
      }
      case Family::hyperexp2: {
        // Balanced-means fit: matches both the mean and the scv.
        const double p = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
        const double branch_mean =
            stream.next_unit() < p ? mean / (2.0 * p) : mean / (2.0 * (1.0 - p));
        return -branch_mean * std::log(stream.next_unit());
      }
    }
    throw std::logic_error("unreachable distribution family");
  }
};

// Number of renewals by time t: sup{n : sum of the first n variates <= t}.
inline long long renewal_count(const DistributionSpec& spec, RandomStream& stream,
                               double t) {
  if (t < 0.0) throw std::invalid_argument("renewal_count requires t >= 0");
  long long n = 0;
  double total = spec.sample(stream);
  while (total <= t) {
    ++n;
    total += spec.sample(stream);
  }
  return n;
}

}  // namespace fjlab
