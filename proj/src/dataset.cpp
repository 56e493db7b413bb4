#include "gs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace gs {

namespace {

constexpr int kSuper = 4;

struct Ellipse {
  double cx, cy, rx, ry, value;
  bool contains(double u, double v) const {
    const double a = (u - cx) / rx, b = (v - cy) / ry;
    return a * a + b * b <= 1.0;
  }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Averages `shade(u, v)` over a kSuper×kSuper grid inside each pixel.
Tensor rasterize(std::size_t size, const std::function<double(double, double)>& shade) {
  Tensor img({1, size, size});
  const double inv = 1.0 / static_cast<double>(size * kSuper);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double u = (static_cast<double>(x * kSuper) + sx + 0.5) * inv;
          const double v = (static_cast<double>(y * kSuper) + sy + 0.5) * inv;
          acc += shade(u, v);
        }
      }
      img[y * size + x] = std::clamp(acc / (kSuper * kSuper), -1.0, 1.0);
    }
  }
  return img;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Faces: return "faces";
    case Family::Scenes: return "scenes";
    case Family::Folder: return "folder";
  }
  return "?";
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<Tensor> Dataset::images(Family family, Split split) const {
  std::vector<Tensor> out;
  for (const Sample& s : samples) {
    if (s.family == family && s.split == split) out.push_back(s.image);
  }
  return out;
}

std::vector<std::size_t> Dataset::ids(Family family, Split split) const {
  std::vector<std::size_t> out;
  for (const Sample& s : samples) {
    if (s.family == family && s.split == split) out.push_back(s.id);
  }
  return out;
}

std::size_t Dataset::count(Family family, Split split) const {
  return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [&](const Sample& s) {
    return s.family == family && s.split == split;
  }));
}

Tensor render_face(std::size_t size, std::mt19937_64& rng) {
  const double bg = uniform(rng, -0.95, -0.25);
  const double bg_slope = uniform(rng, -0.3, 0.3);
  const double cx = 0.5 + uniform(rng, -0.06, 0.06);
  const double cy = 0.54 + uniform(rng, -0.05, 0.05);
  const double rx = uniform(rng, 0.24, 0.33);
  const double ry = uniform(rng, 0.30, 0.40);
  const double skin = uniform(rng, 0.1, 0.85);
  const double hair_value = uniform(rng, -1.0, 0.3);
  const Ellipse hair{cx, cy - uniform(rng, 0.03, 0.09), rx + uniform(rng, 0.02, 0.06), ry + uniform(rng, 0.0, 0.04),
                     hair_value};
  const Ellipse head{cx, cy, rx, ry, skin};
  const double eye_dx = rx * uniform(rng, 0.32, 0.45);
  const double eye_y = cy - ry * uniform(rng, 0.12, 0.3);
  const double eye_rx = rx * uniform(rng, 0.12, 0.2);
  const double eye_ry = ry * uniform(rng, 0.06, 0.12);
  const double eye_value = uniform(rng, -1.0, -0.4);
  const Ellipse left{cx - eye_dx, eye_y, eye_rx, eye_ry, eye_value};
  const Ellipse right{cx + eye_dx, eye_y, eye_rx, eye_ry, eye_value};
  const Ellipse nose{cx, cy + ry * uniform(rng, 0.05, 0.15), rx * uniform(rng, 0.06, 0.1), ry * uniform(rng, 0.1, 0.18),
                     skin - uniform(rng, 0.1, 0.35)};
  const Ellipse mouth{cx, cy + ry * uniform(rng, 0.45, 0.62), rx * uniform(rng, 0.25, 0.45),
                      ry * uniform(rng, 0.04, 0.1), uniform(rng, -0.9, -0.1)};

  return rasterize(size, [&](double u, double v) {
    double val = bg + bg_slope * (v - 0.5);
    if (hair.contains(u, v)) val = hair.value;
    if (head.contains(u, v)) {
      val = head.value;
      for (const Ellipse* e : {&nose, &left, &right, &mouth}) {
        if (e->contains(u, v)) val = e->value;
      }
    }
    return val;
  });
}

Tensor render_scene(std::size_t size, std::mt19937_64& rng) {
  const double angle = uniform(rng, 0.0, 2.0 * M_PI);
  const double base = uniform(rng, -0.8, 0.8);
  const double swing = uniform(rng, -0.8, 0.8);
  struct Shape2 {
    bool circle;
    double a, b, c, d, value;
  };
  std::vector<Shape2> shapes;
  const int count = std::uniform_int_distribution<int>(2, 5)(rng);
  for (int i = 0; i < count; ++i) {
    const bool circle = std::bernoulli_distribution(0.5)(rng);
    if (circle) {
      shapes.push_back({true, uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.05, 0.3), 0.0,
                        uniform(rng, -1.0, 1.0)});
    } else {
      const double x0 = uniform(rng, 0.0, 0.8), y0 = uniform(rng, 0.0, 0.8);
      shapes.push_back({false, x0, y0, x0 + uniform(rng, 0.1, 0.5), y0 + uniform(rng, 0.1, 0.5),
                        uniform(rng, -1.0, 1.0)});
    }
  }
  const double ca = std::cos(angle), sa = std::sin(angle);
  return rasterize(size, [&](double u, double v) {
    double val = base + swing * ((u - 0.5) * ca + (v - 0.5) * sa);
    for (const Shape2& s : shapes) {
      const bool inside = s.circle ? (u - s.a) * (u - s.a) + (v - s.b) * (v - s.b) <= s.c * s.c
                                   : (u >= s.a && u <= s.c && v >= s.b && v <= s.d);
      if (inside) val = s.value;
    }
    return val;
  });
}

Dataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.faces + spec.scenes == 0) throw std::invalid_argument("dataset must contain at least one image");
  if (spec.size == 0) throw std::invalid_argument("image size must be positive");
  if (spec.val_fraction < 0 || spec.test_fraction < 0 || spec.val_fraction + spec.test_fraction > 1.0) {
    throw std::invalid_argument("split fractions must be non-negative and sum to at most 1");
  }
  Dataset ds;
  ds.image_shape = {1, spec.size, spec.size};
  // Separate streams so adding scenes does not change the faces.
  std::mt19937_64 face_rng(spec.seed);
  std::mt19937_64 scene_rng(spec.seed ^ 0x5ce7e5ce7e5ce7e5ULL);
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction * static_cast<double>(spec.faces)));
  const auto n_test = static_cast<std::size_t>(std::floor(spec.test_fraction * static_cast<double>(spec.faces)));
  const std::size_t n_train = spec.faces - n_val - n_test;
  for (std::size_t i = 0; i < spec.faces; ++i) {
    const Split split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    ds.samples.push_back({render_face(spec.size, face_rng), Family::Faces, split, ds.samples.size()});
  }
  for (std::size_t i = 0; i < spec.scenes; ++i) {
    ds.samples.push_back({render_scene(spec.size, scene_rng), Family::Scenes, Split::Test, ds.samples.size()});
  }
  return ds;
}

Dataset generate_synthetic_dataset(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("dataset size must be >= 1");
  SyntheticSpec spec;
  spec.faces = n;
  spec.scenes = n;
  spec.size = size;
  spec.seed = seed;
  return generate_synthetic_dataset(spec);
}

}  // namespace gs
