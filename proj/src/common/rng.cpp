#include "perturbopt/rng.hpp"

#include <cmath>

namespace perturbopt {

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t label_hash(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL) ^ mix64(label_hash(label));
  std::uint64_t position = 1;
  for (std::uint64_t c : counters) {
    h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL * position));
    ++position;
  }
  return mix64(h);
}

Vector Stream::unit_sphere(int d) {
  Vector u(d);
  double norm2 = 0.0;
  do {
    for (int j = 0; j < d; ++j) u[j] = gaussian();
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  return u / std::sqrt(norm2);
}

Vector Stream::unit_ball(int d) {
  Vector u = unit_sphere(d);
  return u * std::pow(uniform(), 1.0 / d);
}

}  // namespace perturbopt
