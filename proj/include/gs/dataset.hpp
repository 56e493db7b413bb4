#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "gs/tensor.hpp"

namespace gs {

/// "faces" are the in-distribution family, "scenes" the out-of-distribution one.
enum class Family { Faces, Scenes, Folder };
enum class Split { Train, Val, Test };

std::string_view family_name(Family f);
std::string_view split_name(Split s);

struct Sample {
  Tensor image;  // [C,H,W], values in [-1,1]
  Family family;
  Split split;
  std::size_t id;
};

struct Dataset {
  Shape image_shape;
  std::vector<Sample> samples;

  std::vector<Tensor> images(Family family, Split split) const;
  std::vector<std::size_t> ids(Family family, Split split) const;
  std::size_t count(Family family, Split split) const;
};

struct SyntheticSpec {
  std::size_t faces = 2000;
  std::size_t scenes = 0;
  std::size_t size = 32;  // square images, one channel
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
};

/// Procedural faces (split train/val/test by the fractions, in that order)
/// followed by scenes (all tagged test). Deterministic in the seed.
Dataset generate_synthetic_dataset(const SyntheticSpec& spec);
/// `n` faces and `n` scenes with the default split fractions.
Dataset generate_synthetic_dataset(std::size_t n, std::size_t size, std::uint64_t seed);

/// Geometry is drawn in unit coordinates and rendered with 4×4 supersampling,
/// so one draw looks the same at any resolution.
Tensor render_face(std::size_t size, std::mt19937_64& rng);
Tensor render_scene(std::size_t size, std::mt19937_64& rng);

}  // namespace gs
