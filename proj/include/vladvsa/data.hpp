#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vladvsa/error.hpp"
#include "vladvsa/matrix.hpp"
#include "vladvsa/rng.hpp"

namespace vladvsa {

struct Sample {
  LocalFeatureSet raw_features;  // N x d_raw
  int class_label = 0;           // 0 real, 1 fake
  int domain_label = 1;          // 1..S
};

using DomainDataset = std::vector<Sample>;

/// Recipe for the synthetic multi-domain benchmark. Every local descriptor
/// is domain_shift + gaussian noise; fake samples additionally plant a cue
/// vector on a minority of their locals — the shared cue, or (a coin flip
/// per sample) the domain's own attack vector. The minority planting is what
/// separates aggregation methods: averaging dilutes the cue by 1/N while a
/// cluster that captures the planted locals keeps it intact.
struct SyntheticSpec {
  std::size_t num_domains = 4;
  std::size_t locals_per_sample = 16;
  std::size_t raw_dim = 8;
  double rho_cue = 0.2;  // fraction of locals carrying the cue on fakes
  std::vector<double> shared_cue;              // d_raw
  std::vector<std::vector<double>> domain_shift;      // S x d_raw
  std::vector<std::vector<double>> specific_attack;   // S x d_raw
  std::vector<double> noise_sigma;                    // S
  std::size_t samples_per_domain_per_class = 200;
  std::uint64_t seed = 99;

  void validate() const {
    if (num_domains == 0 || locals_per_sample == 0 || raw_dim == 0) {
      throw std::invalid_argument("SyntheticSpec: zero dimension");
    }
    if (!(rho_cue > 0.0 && rho_cue <= 1.0)) {
      throw std::invalid_argument("SyntheticSpec: rho_cue must be in (0, 1]");
    }
    if (shared_cue.size() != raw_dim || norm2(shared_cue) == 0.0) {
      throw std::invalid_argument("SyntheticSpec: shared cue must be a nonzero d_raw vector");
    }
    if (domain_shift.size() != num_domains ||
        specific_attack.size() != num_domains ||
        noise_sigma.size() != num_domains) {
      throw std::invalid_argument("SyntheticSpec: per-domain arrays must have S entries");
    }
    for (std::size_t s = 0; s < num_domains; ++s) {
      if (domain_shift[s].size() != raw_dim ||
          specific_attack[s].size() != raw_dim) {
        throw std::invalid_argument("SyntheticSpec: per-domain vector width mismatch");
      }
      if (!(noise_sigma[s] > 0.0)) {
        throw std::invalid_argument("SyntheticSpec: noise_sigma must be positive");
      }
      if (norm2(specific_attack[s]) == 0.0) {
        throw std::invalid_argument("SyntheticSpec: specific attack vector must be nonzero");
      }
    }
  }
};

/// Derives the cue/shift/attack vectors from the seed: a random unit cue
/// scaled by cue_scale, domain shifts orthogonalized against the cue, and
/// per-domain attack directions likewise orthogonal to the shared cue.
inline SyntheticSpec make_synthetic_spec(std::size_t num_domains,
                                         std::size_t locals_per_sample,
                                         std::size_t raw_dim, double rho_cue,
                                         double noise_sigma,
                                         std::size_t samples_per_class,
                                         double cue_scale, double shift_scale,
                                         std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_domains = num_domains;
  spec.locals_per_sample = locals_per_sample;
  spec.raw_dim = raw_dim;
  spec.rho_cue = rho_cue;
  spec.samples_per_domain_per_class = samples_per_class;
  spec.seed = seed;

  Rng rng(derive_seed(seed, 0xda7aULL));
  auto random_unit = [&]() {
    std::vector<double> v(raw_dim);
    for (double& x : v) x = rng.next_gaussian();
    return l2_normalize(std::move(v));
  };
  auto orthogonalize = [&](std::vector<double> v,
                           const std::vector<double>& against) {
    const double proj = dot({v.data(), v.size()}, {against.data(), against.size()});
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= proj * against[j];
    return l2_normalize(std::move(v));
  };

  const std::vector<double> cue_dir = random_unit();
  spec.shared_cue = cue_dir;
  for (double& x : spec.shared_cue) x *= cue_scale;
  for (std::size_t s = 0; s < num_domains; ++s) {
    std::vector<double> shift = orthogonalize(random_unit(), cue_dir);
    for (double& x : shift) x *= shift_scale;
    spec.domain_shift.push_back(std::move(shift));
    std::vector<double> attack = orthogonalize(random_unit(), cue_dir);
    for (double& x : attack) x *= cue_scale;
    spec.specific_attack.push_back(std::move(attack));
    spec.noise_sigma.push_back(noise_sigma);
  }
  spec.validate();
  return spec;
}

/// Deterministic in (spec, spec.seed); domain s draws from its own derived
/// stream. Returns one dataset per domain, class-balanced by construction.
inline std::vector<DomainDataset> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<DomainDataset> domains(spec.num_domains);
  const std::size_t cue_locals = static_cast<std::size_t>(
      std::ceil(spec.rho_cue * static_cast<double>(spec.locals_per_sample)));
  for (std::size_t s = 0; s < spec.num_domains; ++s) {
    Rng rng(derive_seed(spec.seed, s + 1));
    for (int cls = 0; cls <= 1; ++cls) {
      for (std::size_t q = 0; q < spec.samples_per_domain_per_class; ++q) {
        Sample sample;
        sample.class_label = cls;
        sample.domain_label = static_cast<int>(s + 1);
        sample.raw_features = Matrix(spec.locals_per_sample, spec.raw_dim);
        for (std::size_t i = 0; i < spec.locals_per_sample; ++i) {
          for (std::size_t j = 0; j < spec.raw_dim; ++j) {
            sample.raw_features(i, j) =
                spec.domain_shift[s][j] + spec.noise_sigma[s] * rng.next_gaussian();
          }
        }
        if (cls == 1) {
          const bool shared = rng.next_double() < 0.5;
          const std::vector<double>& cue =
              shared ? spec.shared_cue : spec.specific_attack[s];
          const std::vector<std::size_t> rows =
              rng.sample_without_replacement(spec.locals_per_sample, cue_locals);
          for (std::size_t i : rows) {
            for (std::size_t j = 0; j < spec.raw_dim; ++j) {
              sample.raw_features(i, j) += cue[j];
            }
          }
        }
        domains[s].push_back(std::move(sample));
      }
    }
  }
  return domains;
}

// Descriptor-set file layout (little-endian):
//   magic "VVSAFEAT", u32 sample count, u32 N, u32 d_raw,
//   per sample: u8 class, u8 domain, N*d_raw f32 row-major.
constexpr char kFeatureMagic[] = "VVSAFEAT";

namespace detail {
inline void put_u32le(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}
inline bool get_u32le(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}
inline void put_f32le(std::ostream& os, float f) {
  put_u32le(os, std::bit_cast<std::uint32_t>(f));
}
inline bool get_f32le(std::istream& is, float& f) {
  std::uint32_t v;
  if (!get_u32le(is, v)) return false;
  f = std::bit_cast<float>(v);
  return true;
}
}  // namespace detail

inline void write_descriptors(const std::string& path,
                              const std::vector<Sample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  const std::size_t n = samples.empty() ? 0 : samples[0].raw_features.rows();
  const std::size_t d = samples.empty() ? 0 : samples[0].raw_features.cols();
  if (samples.size() > 0xffffffffULL || n > 0xffffffffULL || d > 0xffffffffULL) {
    throw IoError("descriptor dimensions overflow the file format: " + path);
  }
  os.write(kFeatureMagic, 8);
  detail::put_u32le(os, static_cast<std::uint32_t>(samples.size()));
  detail::put_u32le(os, static_cast<std::uint32_t>(n));
  detail::put_u32le(os, static_cast<std::uint32_t>(d));
  for (const Sample& s : samples) {
    if (s.raw_features.rows() != n || s.raw_features.cols() != d) {
      throw IoError("inconsistent sample shape while writing " + path);
    }
    const char cls = static_cast<char>(s.class_label);
    const char dom = static_cast<char>(s.domain_label);
    os.write(&cls, 1);
    os.write(&dom, 1);
    for (double v : s.raw_features.data()) {
      detail::put_f32le(os, static_cast<float>(v));
    }
  }
  if (!os) throw IoError("write failure on " + path);
}

inline std::vector<Sample> read_descriptors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != std::string(kFeatureMagic, 8)) {
    throw IoError("bad magic in " + path);
  }
  std::uint32_t count, n, d;
  if (!detail::get_u32le(is, count) || !detail::get_u32le(is, n) ||
      !detail::get_u32le(is, d)) {
    throw IoError("truncated header in " + path);
  }
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::uint32_t q = 0; q < count; ++q) {
    Sample s;
    char cls, dom;
    if (!is.read(&cls, 1) || !is.read(&dom, 1)) {
      throw IoError("truncated sample header in " + path);
    }
    s.class_label = static_cast<unsigned char>(cls);
    s.domain_label = static_cast<unsigned char>(dom);
    s.raw_features = Matrix(n, d);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i) {
      float f;
      if (!detail::get_f32le(is, f)) {
        throw IoError("truncated feature data in " + path);
      }
      s.raw_features.data()[i] = static_cast<double>(f);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace vladvsa
